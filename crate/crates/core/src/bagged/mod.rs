//! Bagged filters: many independent replicate filters, each weighted locally
//! in space and time when estimating the conditional likelihood of every
//! observation.
//!
//! - [`ubf_loglik`]: one unadapted simulation per replicate.
//! - [`abf_loglik`]: each replicate follows an adapted trajectory, choosing
//!   one of `Np` proposals per observation time.
//! - [`abfir_loglik`]: adapted trajectories steered by a simulated-moment guide
//!   across `S` intermediate resampling steps.
//!
//! Replicates advance in lockstep over time and in parallel over replicates;
//! each draws only from its own keyed random streams, so results do not
//! depend on the number of worker threads.

mod abf;
mod abfir;
pub mod accumulate;
pub(crate) mod guide;
mod state;
mod ubf;

use rayon::prelude::*;

pub use abf::{abf_loglik, abf_loglik_with_weights};
pub use abfir::abfir_loglik;
pub use accumulate::GammaAccumulator;
pub use state::{bagged_state_estimate, StateEstimate, StateFunction, StateMethod};
pub use ubf::ubf_loglik;

pub(crate) use abf::{abf_step, AdaptedReplicate};

use crate::core::{
    log_sum_exp, Diagnostics, LoglikResult, Neighborhood, Observations, ResampleScheme,
    ResolvedNeighborhoods, SpatPompModel, DEFAULT_LOGLIK_FLOOR,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BaggedConfig {
    /// Number of replicates, `R`.
    pub replicates: usize,
    /// Particles per replicate, `Np`. Ignored by the unadapted filter.
    pub particles: usize,
    /// Intermediate steps per observation interval, `S` (ABF-IR only).
    pub substeps: usize,
    /// Guide simulations per replicate (ABF-IR only).
    pub guide_sims: usize,
    pub neighborhood: Neighborhood,
    pub resample: ResampleScheme,
    pub seed: u64,
    /// Value substituted for a conditional log likelihood whose weights all vanish.
    pub loglik_floor: f64,
}

impl BaggedConfig {
    pub fn new(replicates: usize, particles: usize, neighborhood: Neighborhood, seed: u64) -> Self {
        Self {
            replicates,
            particles,
            substeps: 1,
            guide_sims: particles.max(2),
            neighborhood,
            resample: ResampleScheme::default(),
            seed,
            loglik_floor: DEFAULT_LOGLIK_FLOOR,
        }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    pub fn with_guide_sims(mut self, guide_sims: usize) -> Self {
        self.guide_sims = guide_sims;
        self
    }

    pub fn with_resample(mut self, scheme: ResampleScheme) -> Self {
        self.resample = scheme;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 || self.particles == 0 || self.substeps == 0 {
            return Err(Error::config("replicates, particles and substeps must be positive"));
        }
        if self.guide_sims < 2 {
            return Err(Error::config("at least 2 guide simulations are needed for a variance"));
        }
        self.neighborhood.validate()
    }
}

/// `log sum_i exp(num_i) - log sum_i exp(den_i)`, floored when not finite.
pub(crate) fn combine_replicates(num: &[f64], den: &[f64], floor: f64, diag: &mut Diagnostics) -> f64 {
    let d = log_sum_exp(den);
    let v = log_sum_exp(num) - d;
    if v.is_finite() {
        v
    } else {
        diag.degenerate_weight_events += 1;
        floor
    }
}

/// Output of one replicate at one time: per-unit numerator and denominator log terms.
pub(crate) struct StepTerms {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub diag: Diagnostics,
}

/// Runs `step` for every replicate at every time and reduces to a [`LoglikResult`].
pub(crate) fn run_lockstep<T, F>(
    model_units: usize,
    obs: &Observations,
    floor: f64,
    replicates: &mut [T],
    step: F,
) -> LoglikResult
where
    T: Send,
    F: Fn(usize, usize, &mut T) -> StepTerms + Sync,
{
    let (n_units, n_times) = (model_units, obs.n_times());
    let mut per_un = Vec::with_capacity(n_units * n_times);
    let mut diag = Diagnostics::default();
    let mut num = vec![0.0; replicates.len()];
    let mut den = vec![0.0; replicates.len()];
    for n in 0..n_times {
        let terms: Vec<StepTerms> = replicates
            .par_iter_mut()
            .enumerate()
            .map(|(i, rep)| step(n, i, rep))
            .collect();
        for t in &terms {
            diag.merge(&t.diag);
        }
        for u in 0..n_units {
            for (i, t) in terms.iter().enumerate() {
                num[i] = t.num[u];
                den[i] = t.den[u];
            }
            per_un.push(combine_replicates(&num, &den, floor, &mut diag));
        }
    }
    LoglikResult::from_per_un(n_units, n_times, per_un, diag)
}

pub(crate) fn prepare<M: SpatPompModel>(
    model: &M,
    obs: &Observations,
    cfg: &BaggedConfig,
) -> Result<ResolvedNeighborhoods> {
    cfg.validate()?;
    obs.check_against(model.dims())?;
    ResolvedNeighborhoods::new(&cfg.neighborhood, obs.n_units(), obs.n_times())
}
