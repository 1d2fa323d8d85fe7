use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use spatfilter::bagged::{bagged_state_estimate, StateFunction};
use spatfilter::baselines::kalman_loglik;
use spatfilter::core::{derive_seed, simulate_dataset};
use spatfilter::inference::{
    mcap_interval, run_profile, run_slice, FilterSpec, IabfConfig, McapInterval, ModelFamily, ProfilePoint,
};
use spatfilter::{Error, LoglikResult, Observations, SpatPompModel};

use crate::config::ExperimentConfig;
use crate::data::{build_family, read_observations, write_latent, write_observations, AnyFamily};
use crate::output::{per_un_rows, sibling, unix_now, write_manifest, write_rows, Manifest, PerUnRow, ResultRow};
use crate::with_family;

pub struct Ctx {
    pub command: &'static str,
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub per_un: bool,
    pub threads: usize,
}

fn manifest<'a>(ctx: &'a Ctx, started: f64, outputs: &[&Path], runtime_seconds: Vec<f64>) -> Manifest<'a, ExperimentConfig> {
    Manifest {
        command: ctx.command,
        version: env!("CARGO_PKG_VERSION"),
        config: &ctx.cfg,
        seed: ctx.cfg.seed,
        threads: ctx.threads,
        started_unix: started,
        finished_unix: unix_now(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        runtime_seconds,
    }
}

/// Observations from `data_path`, or simulated from the family's base parameters.
fn dataset<F: ModelFamily>(fam: &F, cfg: &ExperimentConfig) -> Result<(Observations, Option<Vec<Vec<f64>>>)> {
    let dims = fam.dims();
    match &cfg.data_path {
        Some(p) => Ok((read_observations(p, dims.n_units(), dims.n_times())?, None)),
        None => {
            let d = simulate_dataset(&fam.build(&fam.base())?, cfg.data_seed());
            Ok((d.obs, d.latent))
        }
    }
}

pub fn simulate(ctx: &Ctx) -> Result<()> {
    let started = unix_now();
    let cfg = &ctx.cfg;
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    let fam = build_family(&cfg.model, cfg.model.units)?;
    let obs_path = ctx.out.join("observations.csv");
    let latent_path = ctx.out.join("latent.csv");
    let mut outputs = vec![obs_path.clone(), latent_path.clone()];
    with_family!(&fam, f => {
        let model = f.build(&f.base())?;
        let d = simulate_dataset(&model, cfg.data_seed());
        write_observations(&obs_path, &cfg.model.name, &d.obs)?;
        write_latent(&latent_path, &model, d.latent.as_deref().unwrap_or_default())?;
    });
    if let AnyFamily::Measles(_, demo) = &fam {
        let p = ctx.out.join("demographics.csv");
        demo.write_csv(&p)?;
        outputs.push(p);
    }
    let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    write_manifest(&ctx.out.join("manifest.json"), &manifest(ctx, started, &refs, Vec::new()))
}

struct Job {
    filter: FilterSpec,
    rep: usize,
    seed: u64,
}

struct Done {
    row: ResultRow,
    per_un: Vec<PerUnRow>,
    seconds: f64,
}

/// Every filter `replications` times on one dataset, rows in (filter, replication) order.
fn run_filters<F: ModelFamily>(ctx: &Ctx, fam: &F, obs: &Observations) -> Result<Vec<Done>> {
    let cfg = &ctx.cfg;
    let mut jobs = Vec::new();
    for fc in cfg.filter_list() {
        let filter = fc.spec()?;
        for rep in 0..cfg.replications.max(1) {
            jobs.push(Job {
                filter: filter.clone(),
                rep,
                seed: derive_seed(cfg.seed, rep as u64),
            });
        }
    }
    if jobs.is_empty() {
        bail!("no filter configured");
    }
    let theta = fam.base();
    let dims = (fam.dims().n_units(), fam.dims().n_times());
    Ok(jobs
        .par_iter()
        .map(|job| {
            let t = Instant::now();
            let result: spatfilter::Result<LoglikResult> = job.filter.evaluate(fam, &theta, obs, job.seed);
            let seconds = t.elapsed().as_secs_f64();
            let row = ResultRow::new(&cfg.experiment_id, &cfg.model.name, &job.filter, dims, job.seed, job.rep + 1, &result);
            let per_un = match (&result, ctx.per_un) {
                (Ok(r), true) => per_un_rows(&cfg.experiment_id, job.filter.name(), job.rep + 1, r),
                _ => Vec::new(),
            };
            Done { row, per_un, seconds }
        })
        .collect())
}

fn write_results(ctx: &Ctx, started: f64, done: Vec<Done>) -> Result<()> {
    let mut rows = Vec::with_capacity(done.len());
    let mut per_un = Vec::new();
    let mut seconds = Vec::with_capacity(done.len());
    for d in done {
        rows.push(d.row);
        per_un.extend(d.per_un);
        seconds.push(d.seconds);
    }
    write_rows(&ctx.out, &rows)?;
    let mut outputs = vec![ctx.out.clone()];
    if ctx.per_un {
        let p = sibling(&ctx.out, "per_un.csv");
        write_rows(&p, &per_un)?;
        outputs.push(p);
    }
    let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    write_manifest(&sibling(&ctx.out, "manifest.json"), &manifest(ctx, started, &refs, seconds))
}

pub fn filter(ctx: &Ctx) -> Result<()> {
    let started = unix_now();
    let fam = build_family(&ctx.cfg.model, ctx.cfg.model.units)?;
    let done = with_family!(&fam, f => {
        let (obs, _) = dataset(f, &ctx.cfg)?;
        run_filters(ctx, f, &obs)?
    });
    write_results(ctx, started, done)
}

pub fn scaling(ctx: &Ctx) -> Result<()> {
    let started = unix_now();
    let cfg = &ctx.cfg;
    if cfg.units.is_empty() {
        bail!("scaling needs a `units` list");
    }
    if cfg.data_path.is_some() {
        bail!("scaling simulates its data; remove `data_path`");
    }
    let mut done = Vec::new();
    for &u in &cfg.units {
        let fam = build_family(&cfg.model, u)?;
        done.extend(with_family!(&fam, f => {
            let (obs, _) = dataset(f, cfg)?;
            run_filters(ctx, f, &obs)?
        }));
    }
    write_results(ctx, started, done)
}

/// Prints a per-filter timing summary after running `filter`.
pub fn bench(ctx: &Ctx) -> Result<()> {
    let started = unix_now();
    let fam = build_family(&ctx.cfg.model, ctx.cfg.model.units)?;
    let done = with_family!(&fam, f => {
        let (obs, _) = dataset(f, &ctx.cfg)?;
        run_filters(ctx, f, &obs)?
    });
    let mut names: Vec<String> = Vec::new();
    for d in &done {
        if !names.contains(&d.row.filter) {
            names.push(d.row.filter.clone());
        }
    }
    println!("filter\treps\tmean_seconds\tmean_loglik");
    for name in &names {
        let sel: Vec<&Done> = done.iter().filter(|d| &d.row.filter == name).collect();
        let secs = sel.iter().map(|d| d.seconds).sum::<f64>() / sel.len() as f64;
        let lls: Vec<f64> = sel.iter().filter_map(|d| d.row.loglik).collect();
        let ll = if lls.is_empty() { f64::NAN } else { lls.iter().sum::<f64>() / lls.len() as f64 };
        println!("{name}\t{}\t{secs:.4}\t{ll:.4}", sel.len());
    }
    write_results(ctx, started, done)
}

/// Slice and profile CSV row: a grid point, a point of the smoothed curve, or the interval.
#[derive(Debug, Default, Serialize)]
struct SliceRow {
    row_type: &'static str,
    parameter: String,
    value: Option<f64>,
    loglik: Option<f64>,
    mc_se: Option<f64>,
    replicates: Option<usize>,
    lo: Option<f64>,
    hi: Option<f64>,
    mle: Option<f64>,
    max_loglik: Option<f64>,
    cutoff: Option<f64>,
    se_mle: Option<f64>,
    /// `name=value` pairs of the full parameter vector, `;`-separated.
    params: String,
    status: String,
}

fn slice_rows<F: ModelFamily>(
    fam: &F,
    name: &str,
    level: f64,
    grid: &[f64],
    points: Vec<spatfilter::Result<ProfilePoint>>,
) -> Vec<SliceRow> {
    let mut rows = Vec::new();
    let mut ok = Vec::new();
    for (g, p) in grid.iter().zip(points) {
        let mut row = SliceRow {
            row_type: "point",
            parameter: name.to_string(),
            value: Some(*g),
            ..Default::default()
        };
        match p {
            Ok(p) => {
                row.loglik = Some(p.loglik);
                row.mc_se = Some(p.mc_se);
                row.replicates = Some(p.replicates.len());
                row.params = fam
                    .params()
                    .iter()
                    .zip(&p.params)
                    .map(|(s, v)| format!("{}={v}", s.name))
                    .collect::<Vec<_>>()
                    .join(";");
                row.status = "ok".into();
                ok.push(p);
            }
            Err(e) => row.status = format!("error: {e}"),
        }
        rows.push(row);
    }
    let mut interval = SliceRow {
        row_type: "interval",
        parameter: name.to_string(),
        ..Default::default()
    };
    match mcap_interval(&ok, level) {
        Ok(McapInterval {
            lo,
            hi,
            mle,
            max_loglik,
            cutoff,
            se_mle,
            curve,
        }) => {
            for (v, l) in curve {
                rows.push(SliceRow {
                    row_type: "curve",
                    parameter: name.to_string(),
                    value: Some(v),
                    loglik: Some(l),
                    status: "ok".into(),
                    ..Default::default()
                });
            }
            interval.lo = Some(lo);
            interval.hi = Some(hi);
            interval.mle = Some(mle);
            interval.max_loglik = Some(max_loglik);
            interval.cutoff = Some(cutoff);
            interval.se_mle = Some(se_mle);
            interval.status = "ok".into();
        }
        Err(Error::UnboundedInterval) => interval.status = "UnboundedInterval".into(),
        Err(e) => interval.status = format!("error: {e}"),
    }
    rows.push(interval);
    rows
}

fn single_filter(cfg: &ExperimentConfig) -> Result<FilterSpec> {
    let list = cfg.filter_list();
    match list.as_slice() {
        [f] => f.spec(),
        _ => bail!("this command takes exactly one filter"),
    }
}

pub fn slice(ctx: &Ctx) -> Result<()> {
    let started = unix_now();
    let cfg = &ctx.cfg;
    let sc = cfg.slice.as_ref().ok_or_else(|| anyhow!("slice needs a `slice` section"))?;
    let filter = single_filter(cfg)?;
    let fam = build_family(&cfg.model, cfg.model.units)?;
    let t = Instant::now();
    let rows = with_family!(&fam, f => {
        let (obs, _) = dataset(f, cfg)?;
        let pts = run_slice(f, &obs, &sc.param, &sc.grid, &filter, cfg.replications, cfg.seed)?;
        slice_rows(f, &sc.param, sc.level, &sc.grid, pts)
    });
    let secs = t.elapsed().as_secs_f64();
    write_rows(&ctx.out, &rows)?;
    write_manifest(&sibling(&ctx.out, "manifest.json"), &manifest(ctx, started, &[&ctx.out], vec![secs]))
}

fn iabf_config<F: ModelFamily>(fam: &F, cfg: &ExperimentConfig) -> Result<IabfConfig> {
    let s = cfg.iabf.as_ref().ok_or_else(|| anyhow!("profile needs an `iabf` section"))?;
    let inner = match &s.filter {
        Some(f) => f.clone(),
        None => cfg.filter_list().into_iter().next().ok_or_else(|| anyhow!("no filter configured"))?,
    };
    let mut filter = inner.bagged()?;
    filter.seed = cfg.seed;
    let specs = fam.params();
    let mut rw_var = vec![0.0; specs.len()];
    for (name, v) in &s.rw_var {
        rw_var[fam.index_of(name)?] = *v;
    }
    let fixed = specs
        .iter()
        .filter(|p| !s.rw_var.contains_key(p.name))
        .map(|p| p.name.to_string())
        .collect();
    let k = s.vectors.max(1);
    let mut start = vec![fam.base(); k];
    for (name, &(lo, hi)) in &s.start_ranges {
        let q = fam.index_of(name)?;
        for (i, t) in start.iter_mut().enumerate() {
            let frac = if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
            t[q] = lo + frac * (hi - lo);
        }
    }
    Ok(IabfConfig {
        iterations: s.iterations,
        rw_var,
        cooling: s.cooling,
        keep: s.keep,
        start,
        fixed,
        filter,
    })
}

pub fn profile(ctx: &Ctx) -> Result<()> {
    let started = unix_now();
    let cfg = &ctx.cfg;
    let sc = cfg.slice.as_ref().ok_or_else(|| anyhow!("profile needs a `slice` section naming the parameter and grid"))?;
    let filter = single_filter(cfg)?;
    let fam = build_family(&cfg.model, cfg.model.units)?;
    let t = Instant::now();
    let rows = with_family!(&fam, f => {
        let (obs, _) = dataset(f, cfg)?;
        let iabf = iabf_config(f, cfg)?;
        let pts = run_profile(f, &obs, &sc.param, &sc.grid, &iabf, &filter, cfg.replications, cfg.seed)?;
        slice_rows(f, &sc.param, sc.level, &sc.grid, pts)
    });
    let secs = t.elapsed().as_secs_f64();
    write_rows(&ctx.out, &rows)?;
    write_manifest(&sibling(&ctx.out, "manifest.json"), &manifest(ctx, started, &[&ctx.out], vec![secs]))
}

#[derive(Debug, Serialize)]
struct StateRow {
    unit: usize,
    time_index: usize,
    estimate: f64,
    /// Simulated latent value, when the data were simulated.
    truth: Option<f64>,
    /// Exact filter mean, for linear-Gaussian models.
    kf_mean: Option<f64>,
}

fn state_rows<F: ModelFamily>(ctx: &Ctx, fam: &F) -> Result<Vec<StateRow>> {
    let cfg = &ctx.cfg;
    let sc = cfg.state.as_ref().ok_or_else(|| anyhow!("state needs a `state` section"))?;
    let fc = cfg.filter_list().into_iter().next().ok_or_else(|| anyhow!("no filter configured"))?;
    let mut bagged = fc.bagged()?;
    bagged.seed = cfg.seed;
    let (obs, latent) = dataset(fam, cfg)?;
    let theta = fam.base();
    let model = fam.build(&theta)?;
    let (n_units, n_times) = (fam.dims().n_units(), fam.dims().n_times());
    let functions: Vec<StateFunction> = (0..n_units)
        .map(|u| StateFunction::unit_mean(u, model.unit_dim(), sc.lags))
        .collect();
    let est = bagged_state_estimate(&model, &obs, &bagged, sc.method, &functions)?;
    let kf = match fam.linear_gaussian(&theta) {
        Some(sys) => Some(kalman_loglik(&sys, &obs)?),
        None => None,
    };
    let mut rows = Vec::with_capacity(n_units * n_times);
    for n in 0..n_times {
        for u in 0..n_units {
            rows.push(StateRow {
                unit: u + 1,
                time_index: n + 1,
                estimate: est.get(u, n),
                truth: latent.as_ref().map(|l| model.unit_state(&l[n + 1], u)[0]),
                kf_mean: kf.as_ref().map(|k| k.means[n][u * model.unit_dim()]),
            });
        }
    }
    Ok(rows)
}

pub fn state(ctx: &Ctx) -> Result<()> {
    let started = unix_now();
    let fam = build_family(&ctx.cfg.model, ctx.cfg.model.units)?;
    let t = Instant::now();
    let rows = with_family!(&fam, f => state_rows(ctx, f)?);
    let secs = t.elapsed().as_secs_f64();
    write_rows(&ctx.out, &rows)?;
    write_manifest(&sibling(&ctx.out, "manifest.json"), &manifest(ctx, started, &[&ctx.out], vec![secs]))
}
