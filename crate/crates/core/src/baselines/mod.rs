//! Comparison filters: exact Kalman, bootstrap and block particle filters,
//! the stochastic ensemble Kalman filter and a guided intermediate
//! resampling filter.

pub mod bpf;
pub mod enkf;
pub mod girf;
pub mod kalman;
pub mod pf;

pub use bpf::{bpf_filter, bpf_loglik, BlockPartition};
pub use enkf::{enkf_filter, enkf_loglik};
pub use girf::{girf_filter, girf_loglik, GirfConfig, GirfOutput};
pub use kalman::{kalman_loglik, KalmanOutput, LinearGaussianSystem};
pub use pf::{pf_filter, pf_loglik};

use crate::core::LoglikResult;

/// A scalar function of the full latent state, averaged by the filters.
pub type StateFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub loglik: LoglikResult,
    /// `means[n][k]`: filter mean of function `k` after assimilating observation `n`.
    pub means: Vec<Vec<f64>>,
}

fn ensemble_means(particles: &[Vec<f64>], functions: &[StateFn]) -> Vec<f64> {
    let np = particles.len() as f64;
    functions
        .iter()
        .map(|f| particles.iter().map(|x| f(x)).sum::<f64>() / np)
        .collect()
}
