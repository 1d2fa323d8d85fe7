//! Experiment configuration: one JSON file per experiment, with a few fields
//! overridable from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use spatfilter::bagged::{BaggedConfig, StateMethod};
use spatfilter::baselines::GirfConfig;
use spatfilter::inference::FilterSpec;
use spatfilter::{Neighborhood, ResampleScheme};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub experiment_id: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub filter: Option<FilterConfig>,
    /// Several filters on the same data; rows follow this order.
    #[serde(default)]
    pub filters: Vec<FilterConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Observation CSV. When absent, data are simulated from the model.
    #[serde(default)]
    pub data_path: Option<PathBuf>,
    /// Seed of the simulated dataset; defaults to `seed`.
    #[serde(default)]
    pub data_seed: Option<u64>,
    /// Unit counts visited by `scaling`.
    #[serde(default)]
    pub units: Vec<usize>,
    #[serde(default)]
    pub slice: Option<SliceConfig>,
    #[serde(default)]
    pub iabf: Option<IabfSettings>,
    #[serde(default)]
    pub state: Option<StateConfig>,
}

fn default_id() -> String {
    "experiment".to_string()
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `bm`, `lorenz` or `measles`.
    pub name: String,
    pub units: usize,
    pub times: usize,
    /// Parameter overrides by name.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Measles only: demographics CSV, truncated to the first `units` cities.
    #[serde(default)]
    pub demographics_path: Option<PathBuf>,
    /// Measles only: seed of the synthetic demographics.
    #[serde(default)]
    pub demographics_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborhoodSpec {
    None,
    /// `{(u, n-1), ..., (u, n-k)}`.
    Lags(usize),
    /// `{(u-1, n), ..., (u-units, n), (u, n-1), ..., (u, n-lags)}`.
    Previous { units: usize, lags: usize },
}

impl NeighborhoodSpec {
    pub fn build(self) -> Neighborhood {
        match self {
            NeighborhoodSpec::None => Neighborhood::empty(),
            NeighborhoodSpec::Lags(k) => Neighborhood::CoLocatedLags(k),
            NeighborhoodSpec::Previous { units, lags } => Neighborhood::previous_units_and_lags(units, lags),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// `kf`, `ubf`, `abf`, `abfir`, `pf`, `bpf`, `enkf` or `girf`.
    pub name: String,
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub particles: Option<usize>,
    #[serde(default)]
    pub substeps: Option<usize>,
    #[serde(default)]
    pub guide_sims: Option<usize>,
    #[serde(default)]
    pub lookahead: Option<usize>,
    #[serde(default)]
    pub block_size: Option<usize>,
    #[serde(default)]
    pub ensemble: Option<usize>,
    #[serde(default)]
    pub neighborhood: Option<NeighborhoodSpec>,
    #[serde(default)]
    pub resample: Option<ResampleScheme>,
}

fn need(v: Option<usize>, field: &str, filter: &str) -> Result<usize> {
    v.ok_or_else(|| anyhow!("filter {filter} needs `{field}`"))
}

impl FilterConfig {
    pub fn bagged(&self) -> Result<BaggedConfig> {
        let n = &self.name;
        let nb = self
            .neighborhood
            .ok_or_else(|| anyhow!("filter {n} needs `neighborhood`"))?
            .build();
        let particles = if n == "ubf" {
            1
        } else {
            need(self.particles, "particles", n)?
        };
        let mut c = BaggedConfig::new(need(self.replicates, "replicates", n)?, particles, nb, 0);
        if n == "abfir" {
            c = c.with_substeps(need(self.substeps, "substeps", n)?);
            if let Some(g) = self.guide_sims {
                c = c.with_guide_sims(g);
            }
        }
        if let Some(r) = self.resample {
            c = c.with_resample(r);
        }
        Ok(c)
    }

    pub fn spec(&self) -> Result<FilterSpec> {
        let n = self.name.as_str();
        let spec = match n {
            "kf" => FilterSpec::Kalman,
            "ubf" => FilterSpec::Ubf(self.bagged()?),
            "abf" => FilterSpec::Abf(self.bagged()?),
            "abfir" => FilterSpec::Abfir(self.bagged()?),
            "pf" => FilterSpec::Pf {
                particles: need(self.particles, "particles", n)?,
            },
            "bpf" => FilterSpec::Bpf {
                particles: need(self.particles, "particles", n)?,
                block_size: need(self.block_size, "block_size", n)?,
            },
            "enkf" => FilterSpec::Enkf {
                ensemble: need(self.ensemble, "ensemble", n)?,
            },
            "girf" => {
                let mut c = GirfConfig::new(
                    need(self.particles, "particles", n)?,
                    need(self.guide_sims, "guide_sims", n)?,
                    need(self.lookahead, "lookahead", n)?,
                    need(self.substeps, "substeps", n)?,
                    0,
                );
                if let Some(r) = self.resample {
                    c.resample = r;
                }
                c.validate()?;
                FilterSpec::Girf(c)
            }
            other => bail!("unknown filter {other}"),
        };
        if let FilterSpec::Ubf(c) | FilterSpec::Abf(c) | FilterSpec::Abfir(c) = &spec {
            c.validate()?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    pub param: String,
    pub grid: Vec<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IabfSettings {
    pub iterations: usize,
    /// Number of parameter vectors, `K`.
    pub vectors: usize,
    /// Perturbation variance on the unconstrained scale; unlisted parameters are fixed.
    pub rw_var: BTreeMap<String, f64>,
    #[serde(default = "default_cooling")]
    pub cooling: f64,
    #[serde(default = "default_keep")]
    pub keep: f64,
    /// Starting values spread evenly over `[lo, hi]`; other parameters start at the model value.
    #[serde(default)]
    pub start_ranges: BTreeMap<String, (f64, f64)>,
    /// Inner filter; defaults to the experiment filter.
    #[serde(default)]
    pub filter: Option<FilterConfig>,
}

fn default_cooling() -> f64 {
    0.5
}

fn default_keep() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub method: StateMethod,
    /// Each unit's estimate is informed by its own observation and this many previous ones.
    #[serde(default)]
    pub lags: usize,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !["bm", "lorenz", "measles"].contains(&self.model.name.as_str()) {
            bail!("unknown model {}", self.model.name);
        }
        for f in self.filter_list() {
            f.spec()?;
        }
        Ok(())
    }

    /// `filters` if given, otherwise the single `filter`.
    pub fn filter_list(&self) -> Vec<FilterConfig> {
        if self.filters.is_empty() {
            self.filter.iter().cloned().collect()
        } else {
            self.filters.clone()
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }
}

/// Replaces fields of `base` by name, rejecting names `base` does not have.
pub fn override_fields<T: Serialize + DeserializeOwned>(base: &T, overrides: &BTreeMap<String, f64>) -> Result<T> {
    let mut value = serde_json::to_value(base)?;
    let obj = value.as_object_mut().expect("parameters serialize to an object");
    for (k, v) in overrides {
        if !obj.contains_key(k) {
            bail!("unknown parameter {k}");
        }
        obj.insert(k.clone(), serde_json::json!(v));
    }
    Ok(serde_json::from_value(value)?)
}
