//! Iterated adapted bagged filtering: likelihood maximization by repeated
//! adapted bagged filtering with perturbed, selected parameter vectors.
//!
//! At every observation time of iteration `m` each of the `K` parameter
//! vectors is perturbed on its unconstrained scale with variance
//! `alpha^(2m/50) * Sigma`, advanced one ABF step with its own `R`
//! replicates, and scored by the summed conditional log likelihood of that
//! time. The best `ceil(pK)` vectors are kept, each copied about `1/p` times
//! together with its replicate states.

use rayon::prelude::*;

use super::family::{ModelFamily, Transform};
use crate::bagged::{abf_step, combine_replicates, prepare, AdaptedReplicate, BaggedConfig};
use crate::core::{rng_substream, Diagnostics, Observations, Purpose, SpatPompModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IabfConfig {
    /// `M`.
    pub iterations: usize,
    /// Perturbation variance of each parameter on its unconstrained scale.
    pub rw_var: Vec<f64>,
    /// `alpha`: the perturbation variance shrinks by `alpha^2` every 50 iterations.
    pub cooling: f64,
    /// `p`: proportion of parameter vectors kept at each selection.
    pub keep: f64,
    /// The `K` starting vectors, on the natural scale.
    pub start: Vec<Vec<f64>>,
    /// Names of parameters held at their starting values.
    pub fixed: Vec<String>,
    /// `R`, `Np`, neighborhood and seed of the inner filter.
    pub filter: BaggedConfig,
}

impl IabfConfig {
    pub fn n_vectors(&self) -> usize {
        self.start.len()
    }

    /// `ceil(pK)`.
    pub fn n_kept(&self) -> usize {
        let k = self.n_vectors();
        ((self.keep * k as f64).ceil() as usize).clamp(1, k)
    }

    /// Variance multiplier at (one-based) iteration `m`.
    pub fn cooling_factor(&self, m: usize) -> f64 {
        self.cooling.powf(2.0 * m as f64 / 50.0)
    }

    fn validate(&self, n_params: usize) -> Result<()> {
        if self.iterations == 0 || self.start.is_empty() {
            return Err(Error::config("need at least one iteration and one parameter vector"));
        }
        if !(self.keep > 0.0 && self.keep <= 1.0) {
            return Err(Error::config(format!("keep proportion {} outside (0, 1]", self.keep)));
        }
        if !(self.cooling > 0.0 && self.cooling <= 1.0) {
            return Err(Error::config(format!("cooling factor {} outside (0, 1]", self.cooling)));
        }
        if self.rw_var.len() != n_params || self.start.iter().any(|t| t.len() != n_params) {
            return Err(Error::Dimension(format!("expected {n_params} parameters per vector")));
        }
        if self.rw_var.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::config("perturbation variances must be nonnegative"));
        }
        self.filter.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationSummary {
    /// Largest log likelihood accumulated along a surviving lineage.
    pub best_loglik: f64,
    pub mean_loglik: f64,
    /// Mean of the final parameter vectors, averaged on the unconstrained scale.
    pub center: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct IabfResult {
    /// `theta^(M)_{1:K}`, natural scale.
    pub params: Vec<Vec<f64>>,
    pub trace: Vec<IterationSummary>,
    pub diagnostics: Diagnostics,
}

impl IabfResult {
    pub fn center(&self) -> &[f64] {
        &self.trace.last().expect("at least one iteration").center
    }
}

/// Indices sorted best first; non-finite scores last, ties to the lower index.
pub fn rank(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        let (sa, sb) = (scores[a], scores[b]);
        match (sa.is_finite(), sb.is_finite()) {
            (true, true) => sb.total_cmp(&sa),
            (true, false) => std::cmp::Ordering::Less,
            (false, true) => std::cmp::Ordering::Greater,
            (false, false) => std::cmp::Ordering::Equal,
        }
        .then(a.cmp(&b))
    });
    idx
}

/// Source of each of the `K` new vectors: `theta^F_k = theta^P_{s(ceil(pk))}`.
pub fn selection(scores: &[f64], keep: f64) -> Vec<usize> {
    let order = rank(scores);
    let k_total = scores.len();
    let kept = ((keep * k_total as f64).ceil() as usize).clamp(1, k_total);
    (1..=k_total)
        .map(|k| {
            let j = ((keep * k as f64).ceil() as usize).clamp(1, kept);
            order[j - 1]
        })
        .collect()
}

fn center(params: &[Vec<f64>], transforms: &[Transform]) -> Vec<f64> {
    let k = params.len() as f64;
    transforms
        .iter()
        .enumerate()
        .map(|(q, t)| t.from_real(params.iter().map(|p| t.to_real(p[q])).sum::<f64>() / k))
        .collect()
}

pub fn iabf_maximize<F: ModelFamily>(family: &F, obs: &Observations, cfg: &IabfConfig) -> Result<IabfResult> {
    let specs = family.params();
    let transforms: Vec<Transform> = specs.iter().map(|s| s.transform).collect();
    cfg.validate(specs.len())?;
    let mut sd: Vec<f64> = cfg.rw_var.iter().map(|v| v.sqrt()).collect();
    for name in &cfg.fixed {
        sd[family.index_of(name)?] = 0.0;
    }
    let first = family.build(&cfg.start[0])?;
    let nb = prepare(&first, obs, &cfg.filter)?;
    let n_units = first.dims().n_units();
    let (k_total, r, np, seed) = (cfg.n_vectors(), cfg.filter.replicates, cfg.filter.particles, cfg.filter.seed);
    let floor = cfg.filter.loglik_floor;
    let mut diag = Diagnostics::default();
    let mut theta = cfg.start.clone();
    let mut trace = Vec::with_capacity(cfg.iterations);

    for m in 0..cfg.iterations {
        let scale = cfg.cooling_factor(m + 1).sqrt();
        let key = |k: usize, i: usize| ((m * k_total + k) * r + i) as u64;
        let mut reps: Vec<Vec<AdaptedReplicate>> = (0..k_total)
            .map(|k| {
                let built = family.build(&theta[k]);
                let model = built.as_ref().unwrap_or(&first);
                (0..r).map(|i| AdaptedReplicate::new(model, seed, key(k, i), nb.max_lag())).collect()
            })
            .collect();
        let mut lineage = vec![0.0; k_total];
        for n in 0..obs.n_times() {
            let perturbed: Vec<Vec<f64>> = theta
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let mut rng = rng_substream(seed, m as u64, n, Purpose::Perturb, k as u64);
                    t.iter()
                        .zip(&transforms)
                        .zip(&sd)
                        .map(|((&v, tr), &s)| {
                            let z = rng.normal();
                            if s == 0.0 {
                                v
                            } else {
                                tr.from_real(tr.to_real(v) + scale * s * z)
                            }
                        })
                        .collect()
                })
                .collect();
            let y = obs.at_time(n);
            let scored: Vec<(f64, Diagnostics)> = reps
                .par_iter_mut()
                .zip(&perturbed)
                .enumerate()
                .map(|(k, (rk, th))| {
                    let Ok(model) = family.build(th) else {
                        return (f64::NEG_INFINITY, Diagnostics::default());
                    };
                    let model_theta = model.theta();
                    let terms: Vec<_> = rk
                        .par_iter_mut()
                        .enumerate()
                        .map(|(i, rep)| abf_step(&model, &model_theta, y, &nb, n, np, seed, key(k, i), rep, None))
                        .collect();
                    let mut d = Diagnostics::default();
                    for t in &terms {
                        d.merge(&t.diag);
                    }
                    let mut total = 0.0;
                    let (mut num, mut den) = (vec![0.0; r], vec![0.0; r]);
                    for u in 0..n_units {
                        for (i, t) in terms.iter().enumerate() {
                            num[i] = t.num[u];
                            den[i] = t.den[u];
                        }
                        total += combine_replicates(&num, &den, floor, &mut d);
                    }
                    (total, d)
                })
                .collect();
            let scores: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
            for (_, d) in &scored {
                diag.merge(d);
            }
            let src = selection(&scores, cfg.keep);
            theta = src.iter().map(|&a| perturbed[a].clone()).collect();
            lineage = src.iter().map(|&a| lineage[a] + scores[a]).collect();
            reps = src.iter().map(|&a| reps[a].clone()).collect();
        }
        let best = lineage.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        trace.push(IterationSummary {
            best_loglik: best,
            mean_loglik: lineage.iter().sum::<f64>() / k_total as f64,
            center: center(&theta, &transforms),
        });
    }
    Ok(IabfResult {
        params: theta,
        trace,
        diagnostics: diag,
    })
}
