use super::abf::{choose_adapted, measurement_weights, AdaptedReplicate};
use super::guide::{guide_variance, log_guide, substep_time};
use super::accumulate::likelihood_terms;
use super::{prepare, run_lockstep, BaggedConfig, StepTerms};
use crate::core::resample::resample_or_uniform;
use crate::core::{rng_substream, Diagnostics, LoglikResult, Observations, Purpose, SpatPompModel};
use crate::error::Result;

/// Adapted bagged filter with intermediate resampling.
///
/// Each replicate draws `guide_sims` forecasts to the next observation time.
/// Their spread sets the process-variance part of the guide, and their
/// measurement weights feed the likelihood estimate. The `particles`
/// proposals then move through `S` equally spaced intermediate times, being
/// resampled by guide ratios, and one of them becomes the adapted state.
///
/// With one substep the proposals are the guide simulations themselves, and
/// the filter coincides with [`super::abf_loglik`] draw for draw.
pub fn abfir_loglik<M: SpatPompModel>(model: &M, obs: &Observations, cfg: &BaggedConfig) -> Result<LoglikResult> {
    let nb = prepare(model, obs, cfg)?;
    let n_units = model.dims().n_units();
    let (seed, ng) = (cfg.seed, cfg.guide_sims);
    let theta = model.theta();
    let mut reps: Vec<AdaptedReplicate> = (0..cfg.replicates)
        .map(|i| AdaptedReplicate::new(model, seed, i as u64, nb.max_lag()))
        .collect();
    Ok(run_lockstep(n_units, obs, cfg.loglik_floor, &mut reps, |n, i, rep| {
        let y = obs.at_time(n);
        let mut diag = Diagnostics::default();
        let guides = abfir_advance(model, &theta, y, n, cfg, i as u64, &mut rep.x, &mut diag);
        let wm = measurement_weights(model, &theta, y, n, &guides);
        let mut terms = StepTerms {
            num: vec![0.0; n_units],
            den: vec![0.0; n_units],
            diag,
        };
        likelihood_terms(&mut rep.acc, &nb, n, &wm, ng, &mut terms.num, &mut terms.den);
        terms
    }))
}

/// Moves the adapted state `x` of replicate `key` through observation `n`
/// and returns the guide simulations.
#[allow(clippy::too_many_arguments)]
pub(crate) fn abfir_advance<M: SpatPompModel>(
    model: &M,
    theta: &M::Theta,
    y: &[f64],
    n: usize,
    cfg: &BaggedConfig,
    key: u64,
    x_adapted: &mut Vec<f64>,
    diag: &mut Diagnostics,
) -> Vec<Vec<f64>> {
    let dims = model.dims();
    let (seed, np, ng, s_max) = (cfg.seed, cfg.particles, cfg.guide_sims, cfg.substeps);
    let (t0, t1) = (dims.interval_start(n), dims.obs_time(n));

    let guides: Vec<Vec<f64>> = (0..ng)
        .map(|k| {
            let mut x = x_adapted.clone();
            model.simulate_transition(&mut x, t0, t1, &mut rng_substream(seed, key, n, Purpose::Propose, k as u64));
            x
        })
        .collect();
    let var = guide_variance(model, n, &guides);

    let mut particles: Vec<Vec<f64>> = vec![x_adapted.clone(); np];
    let mut g_prev = vec![0.0; np];
    for s in 1..=s_max {
        let (ta, tb) = (substep_time(t0, t1, s - 1, s_max), substep_time(t0, t1, s, s_max));
        for (j, x) in particles.iter_mut().enumerate() {
            if s_max == 1 && j < ng {
                x.clone_from(&guides[j]);
                continue;
            }
            let (purpose, sub) = if s_max == 1 {
                (Purpose::Propose, j as u64)
            } else {
                (Purpose::Intermediate, (s * np + j) as u64)
            };
            model.simulate_transition(x, ta, tb, &mut rng_substream(seed, key, n, purpose, sub));
        }
        let frac = if s == s_max { 0.0 } else { (t1 - tb) / (t1 - t0) };
        let g: Vec<f64> = particles
            .iter()
            .map(|x| log_guide(model, theta, x, tb, t1, n, y, &var, frac, diag))
            .collect();
        let w: Vec<f64> = g.iter().zip(&g_prev).map(|(a, b)| a - b).collect();
        if s < s_max {
            let mut rng = rng_substream(seed, key, n, Purpose::Resample, s as u64);
            let idx = resample_or_uniform(&w, cfg.resample, &mut rng, diag);
            particles = idx.iter().map(|&a| particles[a].clone()).collect();
            g_prev = idx.iter().map(|&a| g[a]).collect();
        } else {
            let pick = choose_adapted(&w, seed, key, n, diag);
            x_adapted.clone_from(&particles[pick]);
        }
    }
    guides
}
