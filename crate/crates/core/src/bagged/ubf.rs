use super::accumulate::{likelihood_terms, GammaAccumulator};
use super::{prepare, run_lockstep, BaggedConfig, StepTerms};
use crate::core::{rng_substream, Diagnostics, LoglikResult, Observations, Purpose, SpatPompModel};
use crate::error::Result;

struct Trajectory {
    x: Vec<f64>,
    acc: GammaAccumulator,
}

/// Unadapted bagged filter: `R` independent simulations of the whole latent
/// path, each weighted by the measurement densities in the neighborhood of
/// every observation.
pub fn ubf_loglik<M: SpatPompModel>(model: &M, obs: &Observations, cfg: &BaggedConfig) -> Result<LoglikResult> {
    let nb = prepare(model, obs, cfg)?;
    let dims = model.dims();
    let (n_units, seed) = (dims.n_units(), cfg.seed);
    let theta = model.theta();
    let mut reps: Vec<Trajectory> = (0..cfg.replicates)
        .map(|i| Trajectory {
            x: model.simulate_initial(&mut rng_substream(seed, i as u64, 0, Purpose::Init, 0)),
            acc: GammaAccumulator::new(n_units, nb.max_lag()),
        })
        .collect();
    Ok(run_lockstep(n_units, obs, cfg.loglik_floor, &mut reps, |n, i, rep| {
        let mut rng = rng_substream(seed, i as u64, n, Purpose::Propose, 0);
        model.simulate_transition(&mut rep.x, dims.interval_start(n), dims.obs_time(n), &mut rng);
        let y = obs.at_time(n);
        let wm: Vec<f64> = (0..n_units)
            .map(|u| model.measurement_logdensity(u, n, y[u], model.unit_state(&rep.x, u), &theta))
            .collect();
        let mut terms = StepTerms {
            num: vec![0.0; n_units],
            den: vec![0.0; n_units],
            diag: Diagnostics::default(),
        };
        likelihood_terms(&mut rep.acc, &nb, n, &wm, 1, &mut terms.num, &mut terms.den);
        terms
    }))
}
