//! Bagged filter estimates of `E[f_k(X_n) | Y_{1:n}]` for localized functions `f_k`.

use rayon::prelude::*;

use super::abf::{adapted_weights, choose_adapted, measurement_weights, propose, AdaptedReplicate};
use super::abfir::abfir_advance;
use super::accumulate::{group_sums, log_group_mean, GammaAccumulator};
use super::{prepare, BaggedConfig};
use crate::core::neighborhood::group_by_lag;
use crate::core::{rng_substream, Diagnostics, Observations, Purpose, SpatPompModel};
use crate::error::{Error, Result};

/// A function of the latent state and the observations it is conditioned on.
pub struct StateFunction {
    pub f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    /// Members `(unit, lag)` of its neighborhood: observation `(unit, n - lag)`
    /// informs the estimate at time `n`. Lag 0 is allowed.
    pub neighborhood: Vec<(usize, usize)>,
}

impl StateFunction {
    /// `x_u` (first component of unit `u`) informed by its own current and
    /// `lags` previous observations.
    pub fn unit_mean(u: usize, unit_dim: usize, lags: usize) -> Self {
        Self {
            f: Box::new(move |x| x[u * unit_dim]),
            neighborhood: (0..=lags).map(|l| (u, l)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateMethod {
    Ubf,
    Abf,
    Abfir,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    n_functions: usize,
    /// Time outer, function inner.
    values: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl StateEstimate {
    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.values[n * self.n_functions + k]
    }

    pub fn n_functions(&self) -> usize {
        self.n_functions
    }

    pub fn n_times(&self) -> usize {
        self.values.len() / self.n_functions.max(1)
    }
}

struct Replicate {
    adapted: AdaptedReplicate,
    acc: GammaAccumulator,
}

/// Per-replicate contribution at one time: log weight and function value per `(k, j)`.
struct Contribution {
    log_w: Vec<f64>,
    f: Vec<f64>,
    diag: Diagnostics,
}

pub fn bagged_state_estimate<M: SpatPompModel>(
    model: &M,
    obs: &Observations,
    cfg: &BaggedConfig,
    method: StateMethod,
    functions: &[StateFunction],
) -> Result<StateEstimate> {
    prepare(model, obs, cfg)?;
    let n_units = model.dims().n_units();
    for sf in functions {
        if let Some(&(u, _)) = sf.neighborhood.iter().find(|(u, _)| *u >= n_units) {
            return Err(Error::config(format!("state neighborhood names unit {u} of {n_units}")));
        }
    }
    let groups: Vec<_> = functions
        .iter()
        .map(|sf| {
            // members as (unit, time) relative to a nominal time far in the future
            let mut members: Vec<(usize, usize)> = sf.neighborhood.iter().map(|&(u, l)| (u, usize::MAX - l)).collect();
            members.sort_by_key(|&(v, m)| (m, v));
            members.dedup();
            group_by_lag(&members, usize::MAX)
        })
        .collect();
    let max_lag = groups.iter().filter_map(|g| g.first().map(|g| g.lag)).max().unwrap_or(0);
    let n_fun = functions.len();
    let (seed, theta) = (cfg.seed, model.theta());
    let j = match method {
        StateMethod::Ubf => 1,
        StateMethod::Abf => cfg.particles,
        StateMethod::Abfir => cfg.guide_sims,
    };
    let mut reps: Vec<Replicate> = (0..cfg.replicates)
        .map(|i| Replicate {
            adapted: AdaptedReplicate::new(model, seed, i as u64, 0),
            acc: GammaAccumulator::new(n_fun, max_lag),
        })
        .collect();

    let mut values = Vec::with_capacity(n_fun * obs.n_times());
    let mut diag = Diagnostics::default();
    for n in 0..obs.n_times() {
        let y = obs.at_time(n);
        let contributions: Vec<Contribution> = reps
            .par_iter_mut()
            .enumerate()
            .map(|(i, rep)| {
                let key = i as u64;
                let mut diag = Diagnostics::default();
                let x = &mut rep.adapted.x;
                let (particles, wm) = match method {
                    StateMethod::Ubf => {
                        let dims = model.dims();
                        let mut rng = rng_substream(seed, key, n, Purpose::Propose, 0);
                        model.simulate_transition(x, dims.interval_start(n), dims.obs_time(n), &mut rng);
                        let p = vec![x.clone()];
                        let wm = measurement_weights(model, &theta, y, n, &p);
                        (p, wm)
                    }
                    StateMethod::Abf => {
                        let (p, wm) = propose(model, &theta, y, n, j, seed, key, x);
                        let pick = choose_adapted(&adapted_weights(&wm, n_units, j), seed, key, n, &mut diag);
                        x.clone_from(&p[pick]);
                        (p, wm)
                    }
                    StateMethod::Abfir => {
                        let g = abfir_advance(model, &theta, y, n, cfg, key, x, &mut diag);
                        let wm = measurement_weights(model, &theta, y, n, &g);
                        (g, wm)
                    }
                };
                let mut log_w = Vec::with_capacity(n_fun * j);
                let mut f = Vec::with_capacity(n_fun * j);
                let mut cur = Vec::with_capacity(j);
                for (k, sf) in functions.iter().enumerate() {
                    let past = rep.acc.take(k, n);
                    match groups[k].last().filter(|g| g.lag == 0) {
                        Some(g) => group_sums(&g.units, &wm, j, &mut cur),
                        None => {
                            cur.clear();
                            cur.resize(j, 0.0);
                        }
                    }
                    log_w.extend(cur.iter().map(|c| past + c));
                    f.extend(particles.iter().map(|p| (sf.f)(p)));
                }
                let mut buf = Vec::with_capacity(j);
                for (k, gk) in groups.iter().enumerate() {
                    for g in gk.iter().filter(|g| g.lag > 0) {
                        let m = n + g.lag;
                        if m < obs.n_times() {
                            rep.acc.add(k, m, log_group_mean(&g.units, &wm, j, &mut buf));
                        }
                    }
                }
                Contribution { log_w, f, diag }
            })
            .collect();
        for c in &contributions {
            diag.merge(&c.diag);
        }
        for k in 0..n_fun {
            let range = k * j..(k + 1) * j;
            let max = contributions
                .iter()
                .flat_map(|c| c.log_w[range.clone()].iter().copied())
                .fold(f64::NEG_INFINITY, f64::max);
            let (mut num, mut den) = (0.0, 0.0);
            for c in &contributions {
                for (lw, fv) in c.log_w[range.clone()].iter().zip(&c.f[range.clone()]) {
                    let w = if max.is_finite() { (lw - max).exp() } else { 1.0 };
                    num += w * fv;
                    den += w;
                }
            }
            if !max.is_finite() {
                diag.degenerate_weight_events += 1;
            }
            values.push(num / den);
        }
    }
    Ok(StateEstimate {
        n_functions: n_fun,
        values,
        diagnostics: diag,
    })
}
