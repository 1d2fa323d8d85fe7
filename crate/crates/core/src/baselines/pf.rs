//! Bootstrap particle filter.

use super::bpf::{bpf_filter, BlockPartition};
use super::{FilterOutput, StateFn};
use crate::core::{LoglikResult, Observations, SpatPompModel};
use crate::error::Result;

/// Bootstrap filter log likelihood, resolved per observation time.
pub fn pf_loglik<M: SpatPompModel>(model: &M, obs: &Observations, particles: usize, seed: u64) -> Result<LoglikResult> {
    pf_filter(model, obs, particles, seed, &[]).map(|o| o.loglik)
}

/// Bootstrap filter with filter means of `functions`.
///
/// This is the block particle filter with a single block covering every
/// unit, so the two agree draw for draw.
pub fn pf_filter<M: SpatPompModel>(
    model: &M,
    obs: &Observations,
    particles: usize,
    seed: u64,
    functions: &[StateFn],
) -> Result<FilterOutput> {
    let whole = BlockPartition::single(model.dims().n_units());
    bpf_filter(model, obs, particles, &whole, seed, functions)
}
