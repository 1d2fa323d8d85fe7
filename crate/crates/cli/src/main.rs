//! `spatfilter`: config-driven experiment runner for the bagged and baseline filters.

mod commands;
mod config;
mod data;
mod output;

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use commands::Ctx;
use config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "spatfilter", version, about = "Bagged and baseline filters for spatiotemporal POMP models")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Affects speed only.
    #[arg(long, global = true, env = "SPATFILTER_THREADS")]
    threads: Option<usize>,
    /// Output CSV (a directory for `simulate`). Overrides `output_path`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write long-format per-(unit, time) conditional log likelihoods.
    #[arg(long, global = true)]
    per_un: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Simulate latent states and observations from the model.
    Simulate,
    /// Run each configured filter `replications` times.
    Filter,
    /// Repeat `filter` over the `units` list.
    Scaling,
    /// Likelihood slice over one parameter, with an MCAP interval.
    Slice,
    /// Profile likelihood over one parameter, maximizing the rest by IABF.
    Profile,
    /// Bagged filter means of each unit's latent state.
    State,
    /// `filter` with a timing summary on stdout.
    Bench,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let path = cli.config.clone().ok_or_else(|| anyhow!("--config is required"))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_path = Some(o.clone());
    }
    let out = cfg
        .output_path
        .clone()
        .ok_or_else(|| anyhow!("no output path: pass --out or set `output_path`"))?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let (command, run): (&'static str, fn(&Ctx) -> Result<()>) = match cli.command {
        Command::Simulate => ("simulate", commands::simulate),
        Command::Filter => ("filter", commands::filter),
        Command::Scaling => ("scaling", commands::scaling),
        Command::Slice => ("slice", commands::slice),
        Command::Profile => ("profile", commands::profile),
        Command::State => ("state", commands::state),
        Command::Bench => ("bench", commands::bench),
    };
    let ctx = Ctx {
        command,
        cfg,
        out,
        per_un: cli.per_un,
        threads: rayon::current_num_threads(),
    };
    run(&ctx)
}
