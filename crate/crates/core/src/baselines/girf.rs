//! Guided intermediate resampling filter.
//!
//! A single particle filter that splits each observation interval into `S`
//! substeps. At substep `s` every particle carries a guide
//!
//! ```text
//! g_s(x) = prod_{l < L} prod_u f(y_{u,n+l}; mu(x, t_{n,s}, t_{n+l}), theta'_{u,l})
//! ```
//!
//! where `theta'` inflates the measurement variance by the simulated forecast
//! variance of `h`, discounted linearly to zero at `t_{n+l}`. Particles are
//! weighted by `g_s / g_{s-1}` and resampled at every substep. At `s = S` the
//! `l = 0` factor is the exact measurement density, so the guides telescope
//! and the product of mean weights over all substeps estimates the likelihood.

use rayon::prelude::*;

use crate::bagged::guide::{guide_variance, log_guide, substep_time};
use crate::core::resample::resample_or_uniform;
use crate::core::{
    log_mean_exp, rng_substream, Diagnostics, LoglikResult, Observations, Purpose, ResampleScheme, SpatPompModel,
    DEFAULT_LOGLIK_FLOOR,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GirfConfig {
    pub particles: usize,
    /// Forecast simulations per particle for the guide variance.
    pub guide_sims: usize,
    /// Observations looked ahead, `L >= 1`.
    pub lookahead: usize,
    pub substeps: usize,
    pub resample: ResampleScheme,
    pub seed: u64,
}

impl GirfConfig {
    pub fn new(particles: usize, guide_sims: usize, lookahead: usize, substeps: usize, seed: u64) -> Self {
        Self {
            particles,
            guide_sims,
            lookahead,
            substeps,
            resample: ResampleScheme::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.lookahead == 0 || self.substeps == 0 {
            return Err(Error::config("particles, lookahead and substeps must be positive"));
        }
        if self.guide_sims < 2 {
            return Err(Error::config("at least 2 guide simulations are needed for a variance"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GirfOutput {
    pub loglik: LoglikResult,
    /// `log mean_j w_{n,s,j}` for every substep; each row sums to the
    /// conditional log likelihood of that time.
    pub substep_log_means: Vec<Vec<f64>>,
}

#[derive(Clone)]
struct Particle {
    x: Vec<f64>,
    /// Guide variance per lookahead position, then unit.
    var: Vec<Vec<f64>>,
    /// Log guide carried from the previous substep.
    g: f64,
}

pub fn girf_loglik<M: SpatPompModel>(model: &M, obs: &Observations, cfg: &GirfConfig) -> Result<LoglikResult> {
    girf_filter(model, obs, cfg).map(|o| o.loglik)
}

pub fn girf_filter<M: SpatPompModel>(model: &M, obs: &Observations, cfg: &GirfConfig) -> Result<GirfOutput> {
    cfg.validate()?;
    let dims = model.dims();
    obs.check_against(dims)?;
    let (np, ng, s_max, seed) = (cfg.particles, cfg.guide_sims, cfg.substeps, cfg.seed);
    let n_times = obs.n_times();
    let theta = model.theta();
    let mut diag = Diagnostics::default();
    let mut ps: Vec<Particle> = (0..np)
        .into_par_iter()
        .map(|j| Particle {
            x: model.simulate_initial(&mut rng_substream(seed, 0, 0, Purpose::Init, j as u64)),
            var: Vec::new(),
            g: 0.0,
        })
        .collect();
    let mut per_time = Vec::with_capacity(n_times);
    let mut substep_log_means = Vec::with_capacity(n_times);
    for n in 0..n_times {
        let horizon = cfg.lookahead.min(n_times - n);
        let t0 = dims.interval_start(n);
        let t1 = dims.obs_time(n);

        // forecast spread of h at each lookahead time, per particle
        ps.par_iter_mut().enumerate().for_each(|(j, p)| {
            let mut sims: Vec<Vec<f64>> = vec![p.x.clone(); ng];
            let mut t = t0;
            p.var.clear();
            for l in 0..horizon {
                let t_next = dims.obs_time(n + l);
                for (k, x) in sims.iter_mut().enumerate() {
                    let sub = ((j * ng + k) * cfg.lookahead + l) as u64;
                    model.simulate_transition(x, t, t_next, &mut rng_substream(seed, 0, n, Purpose::Guide, sub));
                }
                p.var.push(guide_variance(model, n + l, &sims));
                t = t_next;
            }
        });

        let mut row = Vec::with_capacity(s_max);
        for s in 1..=s_max {
            let (ta, tb) = (substep_time(t0, t1, s - 1, s_max), substep_time(t0, t1, s, s_max));
            let scored: Vec<(f64, f64, Diagnostics)> = ps
                .par_iter_mut()
                .enumerate()
                .map(|(j, p)| {
                    let sub = ((s - 1) * np + j) as u64;
                    model.simulate_transition(&mut p.x, ta, tb, &mut rng_substream(seed, 0, n, Purpose::Propose, sub));
                    let mut d = Diagnostics::default();
                    let mut terms = (0..horizon).map(|l| {
                        let target = n + l;
                        let t_l = dims.obs_time(target);
                        let frac = if s == s_max && l == 0 { 0.0 } else { (t_l - tb) / (t_l - t0) };
                        log_guide(model, &theta, &p.x, tb, t_l, target, obs.at_time(target), &p.var[l], frac, &mut d)
                    });
                    let current = terms.next().unwrap_or(0.0);
                    let ahead = terms.fold(0.0, |a, v| a + v);
                    (current, ahead, d)
                })
                .collect();
            let mut w = Vec::with_capacity(np);
            for (p, (current, ahead, d)) in ps.iter().zip(&scored) {
                diag.merge(d);
                w.push(current + ahead - p.g);
            }
            let lm = log_mean_exp(&w);
            row.push(if lm.is_finite() {
                lm
            } else {
                diag.degenerate_weight_events += 1;
                DEFAULT_LOGLIK_FLOOR
            });
            // after the last substep only the look-ahead factors remain as the guide
            let carried: Vec<f64> = scored
                .iter()
                .map(|(c, a, _)| if s == s_max { *a } else { c + a })
                .collect();
            let mut rng = rng_substream(seed, 0, n, Purpose::Resample, s as u64);
            let idx = resample_or_uniform(&w, cfg.resample, &mut rng, &mut diag);
            ps = idx
                .iter()
                .map(|&a| Particle {
                    g: carried[a],
                    ..ps[a].clone()
                })
                .collect();
        }
        per_time.push(row.iter().fold(0.0, |a, v| a + v));
        substep_log_means.push(row);
    }
    Ok(GirfOutput {
        loglik: LoglikResult::from_per_time(dims.n_units(), per_time, diag),
        substep_log_means,
    })
}
