use super::accumulate::{likelihood_terms, GammaAccumulator};
use super::{prepare, run_lockstep, BaggedConfig, StepTerms};
use crate::core::resample::sample_or_uniform;
use crate::core::{
    rng_substream, Diagnostics, LogWeightTensor, LoglikResult, Observations, Purpose,
    ResolvedNeighborhoods, SpatPompModel,
};
use crate::error::Result;

/// One replicate of an adapted bagged filter.
#[derive(Debug, Clone)]
pub(crate) struct AdaptedReplicate {
    pub x: Vec<f64>,
    pub acc: GammaAccumulator,
}

impl AdaptedReplicate {
    pub fn new<M: SpatPompModel>(model: &M, seed: u64, key: u64, max_lag: usize) -> Self {
        Self {
            x: model.simulate_initial(&mut rng_substream(seed, key, 0, Purpose::Init, 0)),
            acc: GammaAccumulator::new(model.dims().n_units(), max_lag),
        }
    }
}

/// Measurement log weights of every particle, unit-major.
pub(crate) fn measurement_weights<M: SpatPompModel>(
    model: &M,
    theta: &M::Theta,
    y: &[f64],
    n: usize,
    particles: &[Vec<f64>],
) -> Vec<f64> {
    let j = particles.len();
    let mut wm = vec![0.0; y.len() * j];
    for (q, x) in particles.iter().enumerate() {
        for (u, &yu) in y.iter().enumerate() {
            wm[u * j + q] = model.measurement_logdensity(u, n, yu, model.unit_state(x, u), theta);
        }
    }
    wm
}

/// Adapted resampling log weight of each particle: its summed measurement log weights.
pub(crate) fn adapted_weights(wm: &[f64], n_units: usize, j: usize) -> Vec<f64> {
    (0..j)
        .map(|q| (0..n_units).fold(0.0, |a, u| a + wm[u * j + q]))
        .collect()
}

/// Picks the particle that continues the adapted trajectory.
pub(crate) fn choose_adapted(log_w: &[f64], seed: u64, key: u64, n: usize, diag: &mut Diagnostics) -> usize {
    if log_w.len() == 1 {
        return 0;
    }
    let mut rng = rng_substream(seed, key, n, Purpose::Resample, 0);
    sample_or_uniform(log_w, &mut rng, diag)
}

/// Draws `particles` proposals from the adapted state of replicate `key`,
/// returning them with their unit-major measurement log weights.
#[allow(clippy::too_many_arguments)]
pub(crate) fn propose<M: SpatPompModel>(
    model: &M,
    theta: &M::Theta,
    y: &[f64],
    n: usize,
    particles: usize,
    seed: u64,
    key: u64,
    x: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dims = model.dims();
    let (t_a, t_b) = (dims.interval_start(n), dims.obs_time(n));
    let proposals: Vec<Vec<f64>> = (0..particles)
        .map(|j| {
            let mut p = x.to_vec();
            let mut rng = rng_substream(seed, key, n, Purpose::Propose, j as u64);
            model.simulate_transition(&mut p, t_a, t_b, &mut rng);
            p
        })
        .collect();
    let wm = measurement_weights(model, theta, y, n, &proposals);
    (proposals, wm)
}

/// Advances one replicate through observation `n` with `particles` proposals.
#[allow(clippy::too_many_arguments)]
pub(crate) fn abf_step<M: SpatPompModel>(
    model: &M,
    theta: &M::Theta,
    y: &[f64],
    nb: &ResolvedNeighborhoods,
    n: usize,
    particles: usize,
    seed: u64,
    key: u64,
    rep: &mut AdaptedReplicate,
    record: Option<&mut Vec<f64>>,
) -> StepTerms {
    let n_units = model.dims().n_units();
    let (proposals, wm) = propose(model, theta, y, n, particles, seed, key, &rep.x);
    let mut terms = StepTerms {
        num: vec![0.0; n_units],
        den: vec![0.0; n_units],
        diag: Diagnostics::default(),
    };
    likelihood_terms(&mut rep.acc, nb, n, &wm, particles, &mut terms.num, &mut terms.den);
    let aw = adapted_weights(&wm, n_units, particles);
    let pick = choose_adapted(&aw, seed, key, n, &mut terms.diag);
    rep.x.clone_from(&proposals[pick]);
    if let Some(out) = record {
        *out = wm;
    }
    terms
}

/// Adapted bagged filter.
pub fn abf_loglik<M: SpatPompModel>(model: &M, obs: &Observations, cfg: &BaggedConfig) -> Result<LoglikResult> {
    run_abf(model, obs, cfg, false).map(|(r, _)| r)
}

/// [`abf_loglik`], also returning every measurement log weight `w^M[u, n, i, j]`.
pub fn abf_loglik_with_weights<M: SpatPompModel>(
    model: &M,
    obs: &Observations,
    cfg: &BaggedConfig,
) -> Result<(LoglikResult, LogWeightTensor)> {
    let (r, w) = run_abf(model, obs, cfg, true)?;
    Ok((r, w.expect("recorded")))
}

fn run_abf<M: SpatPompModel>(
    model: &M,
    obs: &Observations,
    cfg: &BaggedConfig,
    record: bool,
) -> Result<(LoglikResult, Option<LogWeightTensor>)> {
    let nb = prepare(model, obs, cfg)?;
    let n_units = model.dims().n_units();
    let (seed, np) = (cfg.seed, cfg.particles);
    let theta = model.theta();
    let mut reps: Vec<(AdaptedReplicate, Vec<Vec<f64>>)> = (0..cfg.replicates)
        .map(|i| (AdaptedReplicate::new(model, seed, i as u64, nb.max_lag()), Vec::new()))
        .collect();
    let result = run_lockstep(n_units, obs, cfg.loglik_floor, &mut reps, |n, i, (rep, log)| {
        let mut wm = Vec::new();
        let terms = abf_step(model, &theta, obs.at_time(n), &nb, n, np, seed, i as u64, rep, record.then_some(&mut wm));
        if record {
            log.push(wm);
        }
        terms
    });
    let tensor = record.then(|| {
        let mut t = LogWeightTensor::new(n_units, obs.n_times(), cfg.replicates, np);
        for (i, (_, log)) in reps.iter().enumerate() {
            for (n, wm) in log.iter().enumerate() {
                for u in 0..n_units {
                    for j in 0..np {
                        t.set(u, n, i, j, wm[u * np + j]);
                    }
                }
            }
        }
        t
    });
    Ok((result, tensor))
}
