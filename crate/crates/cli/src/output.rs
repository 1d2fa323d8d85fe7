//! Result CSVs and their JSON manifests.
//!
//! CSV bodies depend only on the config and seed. Anything that varies
//! between runs (timings, timestamps, thread count) goes in the manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::Serialize;

use spatfilter::inference::FilterSpec;
use spatfilter::LoglikResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub model: String,
    pub filter: String,
    #[serde(rename = "U")]
    pub n_units: usize,
    #[serde(rename = "N")]
    pub n_times: usize,
    #[serde(rename = "R")]
    pub replicates: Option<usize>,
    #[serde(rename = "Np")]
    pub particles: Option<usize>,
    #[serde(rename = "S")]
    pub substeps: Option<usize>,
    #[serde(rename = "Nguide")]
    pub guide_sims: Option<usize>,
    pub block_size: Option<usize>,
    pub neighborhood_tag: String,
    pub seed: u64,
    /// One-based.
    pub replication: usize,
    pub loglik: Option<f64>,
    pub loglik_per_unit_time: Option<f64>,
    pub degenerate_weight_events: Option<usize>,
    /// `ok`, or the error that stopped this replication.
    pub status: String,
}

impl ResultRow {
    pub fn new(
        experiment_id: &str,
        model: &str,
        filter: &FilterSpec,
        dims: (usize, usize),
        seed: u64,
        replication: usize,
        result: &spatfilter::Result<LoglikResult>,
    ) -> Self {
        let (n_units, n_times) = dims;
        let mut row = Self {
            experiment_id: experiment_id.to_string(),
            model: model.to_string(),
            filter: filter.name().to_string(),
            n_units,
            n_times,
            replicates: None,
            particles: None,
            substeps: None,
            guide_sims: None,
            block_size: None,
            neighborhood_tag: String::new(),
            seed,
            replication,
            loglik: None,
            loglik_per_unit_time: None,
            degenerate_weight_events: None,
            status: "ok".to_string(),
        };
        match filter {
            FilterSpec::Kalman => {}
            FilterSpec::Ubf(c) | FilterSpec::Abf(c) | FilterSpec::Abfir(c) => {
                row.replicates = Some(c.replicates);
                row.particles = Some(if matches!(filter, FilterSpec::Ubf(_)) { 1 } else { c.particles });
                row.neighborhood_tag = c.neighborhood.tag();
                if let FilterSpec::Abfir(_) = filter {
                    row.substeps = Some(c.substeps);
                    row.guide_sims = Some(c.guide_sims);
                }
            }
            FilterSpec::Pf { particles } => row.particles = Some(*particles),
            FilterSpec::Bpf { particles, block_size } => {
                row.particles = Some(*particles);
                row.block_size = Some(*block_size);
            }
            FilterSpec::Enkf { ensemble } => row.particles = Some(*ensemble),
            FilterSpec::Girf(c) => {
                row.particles = Some(c.particles);
                row.substeps = Some(c.substeps);
                row.guide_sims = Some(c.guide_sims);
            }
        }
        match result {
            Ok(r) => {
                row.loglik = Some(r.total());
                row.loglik_per_unit_time = Some(r.total() / (n_units * n_times) as f64);
                row.degenerate_weight_events = Some(r.diagnostics.degenerate_weight_events);
            }
            Err(e) => row.status = format!("error: {e}"),
        }
        row
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format conditional log likelihoods, one row per `(u, n)`.
#[derive(Debug, Serialize)]
pub struct PerUnRow {
    pub experiment_id: String,
    pub filter: String,
    #[serde(rename = "U")]
    pub n_units: usize,
    pub replication: usize,
    pub unit: usize,
    pub time_index: usize,
    pub loglik: f64,
}

pub fn per_un_rows(experiment_id: &str, filter: &str, replication: usize, r: &LoglikResult) -> Vec<PerUnRow> {
    let mut rows = Vec::new();
    for n in 0..r.n_times() {
        for u in 0..r.n_units() {
            if let Some(v) = r.get(u, n) {
                rows.push(PerUnRow {
                    experiment_id: experiment_id.to_string(),
                    filter: filter.to_string(),
                    n_units: r.n_units(),
                    replication,
                    unit: u + 1,
                    time_index: n + 1,
                    loglik: v,
                });
            }
        }
    }
    rows
}

/// `results.csv` -> `results.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a C,
    pub seed: u64,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
    /// Wall-clock seconds per result row (or per grid point), in output order.
    pub runtime_seconds: Vec<f64>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn write_manifest<C: Serialize>(path: &Path, m: &Manifest<C>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(m)? + "\n")?;
    Ok(())
}
