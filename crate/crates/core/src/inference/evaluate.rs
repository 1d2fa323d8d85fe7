//! One interface over every likelihood estimator, for slices and benchmarks.

use crate::bagged::{abf_loglik, abfir_loglik, ubf_loglik, BaggedConfig};
use crate::baselines::{bpf_loglik, enkf_loglik, girf_loglik, kalman_loglik, pf_loglik, BlockPartition, GirfConfig};
use crate::core::{LoglikResult, Observations};
use crate::error::{Error, Result};

use super::family::ModelFamily;

#[derive(Debug, Clone, PartialEq)]
pub enum FilterSpec {
    /// Exact Kalman filter; needs a linear-Gaussian family.
    Kalman,
    Ubf(BaggedConfig),
    Abf(BaggedConfig),
    Abfir(BaggedConfig),
    Pf { particles: usize },
    Bpf { particles: usize, block_size: usize },
    Enkf { ensemble: usize },
    Girf(GirfConfig),
}

impl FilterSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FilterSpec::Kalman => "kf",
            FilterSpec::Ubf(_) => "ubf",
            FilterSpec::Abf(_) => "abf",
            FilterSpec::Abfir(_) => "abfir",
            FilterSpec::Pf { .. } => "pf",
            FilterSpec::Bpf { .. } => "bpf",
            FilterSpec::Enkf { .. } => "enkf",
            FilterSpec::Girf(_) => "girf",
        }
    }

    /// True when repeated runs give the same answer regardless of seed.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, FilterSpec::Kalman)
    }

    /// Runs the filter on the model with parameters `theta`, using `seed` for
    /// every random draw (the seed stored in a bagged or GIRF config is ignored).
    pub fn evaluate<F: ModelFamily>(
        &self,
        family: &F,
        theta: &[f64],
        obs: &Observations,
        seed: u64,
    ) -> Result<LoglikResult> {
        if let FilterSpec::Kalman = self {
            let system = family
                .linear_gaussian(theta)
                .ok_or_else(|| Error::config("the Kalman filter needs a linear-Gaussian model"))?;
            return kalman_loglik(&system, obs).map(|o| o.loglik);
        }
        let model = family.build(theta)?;
        match self {
            FilterSpec::Kalman => unreachable!(),
            FilterSpec::Ubf(c) => ubf_loglik(&model, obs, &c.clone().with_seed(seed)),
            FilterSpec::Abf(c) => abf_loglik(&model, obs, &c.clone().with_seed(seed)),
            FilterSpec::Abfir(c) => abfir_loglik(&model, obs, &c.clone().with_seed(seed)),
            FilterSpec::Pf { particles } => pf_loglik(&model, obs, *particles, seed),
            FilterSpec::Bpf { particles, block_size } => {
                let blocks = BlockPartition::contiguous(family.dims().n_units(), *block_size)?;
                bpf_loglik(&model, obs, *particles, &blocks, seed)
            }
            FilterSpec::Enkf { ensemble } => enkf_loglik(&model, obs, *ensemble, seed),
            FilterSpec::Girf(c) => girf_loglik(&model, obs, &GirfConfig { seed, ..c.clone() }),
        }
    }
}
