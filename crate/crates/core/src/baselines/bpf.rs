//! Block particle filter.

use rayon::prelude::*;

use super::{ensemble_means, FilterOutput, StateFn};
use crate::core::resample::resample_or_uniform;
use crate::core::{
    log_mean_exp, rng_substream, Diagnostics, LoglikResult, Observations, Purpose, ResampleScheme, SpatPompModel,
    DEFAULT_LOGLIK_FLOOR,
};
use crate::error::{Error, Result};

/// Disjoint unit blocks covering `0..U`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
}

impl BlockPartition {
    pub fn new(blocks: Vec<Vec<usize>>, n_units: usize) -> Result<Self> {
        let mut seen = vec![false; n_units];
        for &u in blocks.iter().flatten() {
            if u >= n_units || std::mem::replace(&mut seen[u], true) {
                return Err(Error::config(format!("unit {u} is out of range or in two blocks")));
            }
        }
        if seen.iter().any(|s| !s) || blocks.iter().any(|b| b.is_empty()) {
            return Err(Error::config("blocks must be non-empty and cover every unit"));
        }
        Ok(Self { blocks })
    }

    /// Contiguous blocks of `size` units; the last block may be shorter.
    pub fn contiguous(n_units: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::config("block size must be positive"));
        }
        let units: Vec<usize> = (0..n_units).collect();
        Self::new(units.chunks(size).map(|c| c.to_vec()).collect(), n_units)
    }

    pub fn single(n_units: usize) -> Self {
        Self {
            blocks: vec![(0..n_units).collect()],
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    fn n_units(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }
}

pub fn bpf_loglik<M: SpatPompModel>(
    model: &M,
    obs: &Observations,
    particles: usize,
    partition: &BlockPartition,
    seed: u64,
) -> Result<LoglikResult> {
    bpf_filter(model, obs, particles, partition, seed, &[]).map(|o| o.loglik)
}

/// Block particle filter: particles move jointly, but each block is weighted
/// by its own measurements and resampled independently, and the resampled
/// blocks are stitched back together.
pub fn bpf_filter<M: SpatPompModel>(
    model: &M,
    obs: &Observations,
    particles: usize,
    partition: &BlockPartition,
    seed: u64,
    functions: &[StateFn],
) -> Result<FilterOutput> {
    let dims = model.dims();
    obs.check_against(dims)?;
    if particles == 0 {
        return Err(Error::config("need at least one particle"));
    }
    if partition.n_units() != dims.n_units() {
        return Err(Error::config("block partition does not match the number of units"));
    }
    let d = model.unit_dim();
    let mut diag = Diagnostics::default();
    let mut xs: Vec<Vec<f64>> = (0..particles)
        .into_par_iter()
        .map(|j| model.simulate_initial(&mut rng_substream(seed, 0, 0, Purpose::Init, j as u64)))
        .collect();
    let theta = model.theta();
    let mut per_time = Vec::with_capacity(obs.n_times());
    let mut means = Vec::with_capacity(obs.n_times());
    for n in 0..obs.n_times() {
        let (t_a, t_b) = (dims.interval_start(n), dims.obs_time(n));
        let y = obs.at_time(n);
        // per particle, per block
        let block_w: Vec<Vec<f64>> = xs
            .par_iter_mut()
            .enumerate()
            .map(|(j, x)| {
                model.simulate_transition(x, t_a, t_b, &mut rng_substream(seed, 0, n, Purpose::Propose, j as u64));
                partition
                    .blocks
                    .iter()
                    .map(|b| {
                        b.iter().fold(0.0, |a, &u| {
                            a + model.measurement_logdensity(u, n, y[u], model.unit_state(x, u), &theta)
                        })
                    })
                    .collect()
            })
            .collect();
        let mut ll = 0.0;
        let mut next = xs.clone();
        for (b, units) in partition.blocks.iter().enumerate() {
            let w: Vec<f64> = block_w.iter().map(|wb| wb[b]).collect();
            let lm = log_mean_exp(&w);
            ll += if lm.is_finite() {
                lm
            } else {
                diag.degenerate_weight_events += 1;
                DEFAULT_LOGLIK_FLOOR
            };
            let mut rng = rng_substream(seed, 0, n, Purpose::Resample, b as u64);
            let idx = resample_or_uniform(&w, ResampleScheme::Systematic, &mut rng, &mut diag);
            for (dst, &a) in next.iter_mut().zip(&idx) {
                for &u in units {
                    dst[u * d..(u + 1) * d].copy_from_slice(&xs[a][u * d..(u + 1) * d]);
                }
            }
        }
        xs = next;
        per_time.push(ll);
        means.push(ensemble_means(&xs, functions));
    }
    Ok(FilterOutput {
        loglik: LoglikResult::from_per_time(dims.n_units(), per_time, diag),
        means,
    })
}
