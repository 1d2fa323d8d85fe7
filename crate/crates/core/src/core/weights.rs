//! Log-domain weight arithmetic and likelihood result containers.

use crate::error::{Error, Result};

/// Default floor applied to a conditional log likelihood whose weights all vanish.
pub const DEFAULT_LOGLIK_FLOOR: f64 = -35.0;

/// `log(sum(exp(v)))`, shifted by the maximum. All `-inf` input gives `-inf`.
///
/// Panics on an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "log_sum_exp of an empty slice");
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log(mean(exp(v)))`.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    log_sum_exp(values) - (values.len() as f64).ln()
}

/// Self-normalized conditional log likelihood
/// `log(sum(exp(wm + wp))) - log(sum(exp(wp)))`.
pub fn conditional_loglik(wm: &[f64], wp: &[f64]) -> Result<f64> {
    if wm.len() != wp.len() || wm.is_empty() {
        return Err(Error::Dimension(format!(
            "measurement weights ({}) and prediction weights ({}) differ in length",
            wm.len(),
            wp.len()
        )));
    }
    let den = log_sum_exp(wp);
    if den == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights {
            unit: None,
            time: 0,
        });
    }
    let num: Vec<f64> = wm.iter().zip(wp).map(|(m, p)| m + p).collect();
    Ok(log_sum_exp(&num) - den)
}

/// Effective sample size of a set of log weights, `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let (s1, s2) = log_weights.iter().fold((0.0, 0.0), |(a, b), w| {
        let e = (w - max).exp();
        (a + e, b + e * e)
    });
    s1 * s1 / s2
}

/// Log-weights indexed by `(unit, time, replicate, particle)`, row-major in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightTensor {
    dims: [usize; 4],
    values: Vec<f64>,
}

impl LogWeightTensor {
    pub fn new(n_units: usize, n_times: usize, n_reps: usize, n_particles: usize) -> Self {
        let len = n_units * n_times * n_reps * n_particles;
        Self {
            dims: [n_units, n_times, n_reps, n_particles],
            values: vec![0.0; len],
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    fn offset(&self, u: usize, n: usize, i: usize, j: usize) -> usize {
        let [_, nn, r, p] = self.dims;
        ((u * nn + n) * r + i) * p + j
    }

    pub fn get(&self, u: usize, n: usize, i: usize, j: usize) -> f64 {
        self.values[self.offset(u, n, i, j)]
    }

    /// Sets one entry. NaN is rejected; `-inf` (zero weight) is allowed.
    pub fn set(&mut self, u: usize, n: usize, i: usize, j: usize, value: f64) {
        assert!(!value.is_nan(), "NaN log weight at ({u}, {n}, {i}, {j})");
        let k = self.offset(u, n, i, j);
        self.values[k] = value;
    }

    /// Particle weights for one `(unit, time, replicate)`.
    pub fn particles(&self, u: usize, n: usize, i: usize) -> &[f64] {
        let k = self.offset(u, n, i, 0);
        &self.values[k..k + self.dims[3]]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Resampling pools or likelihood terms whose weights all vanished.
    pub degenerate_weight_events: usize,
    /// Parameter reconstructions clamped to the boundary of their valid range.
    pub clamp_events: usize,
    /// Mean effective sample size over resampling events.
    pub mean_ess: f64,
    /// Smallest effective sample size over resampling events.
    pub min_ess: f64,
    pub(crate) ess_count: usize,
}

impl Diagnostics {
    pub fn record_ess(&mut self, ess: f64) {
        if self.ess_count == 0 {
            self.min_ess = ess;
        } else {
            self.min_ess = self.min_ess.min(ess);
        }
        self.ess_count += 1;
        self.mean_ess += (ess - self.mean_ess) / self.ess_count as f64;
    }

    pub fn merge(&mut self, other: &Diagnostics) {
        self.degenerate_weight_events += other.degenerate_weight_events;
        self.clamp_events += other.clamp_events;
        if other.ess_count > 0 {
            let total = self.ess_count + other.ess_count;
            self.mean_ess = (self.mean_ess * self.ess_count as f64
                + other.mean_ess * other.ess_count as f64)
                / total as f64;
            self.min_ess = if self.ess_count == 0 {
                other.min_ess
            } else {
                self.min_ess.min(other.min_ess)
            };
            self.ess_count = total;
        }
    }
}

/// Conditional log-likelihood estimates and their total.
#[derive(Debug, Clone, PartialEq)]
pub struct LoglikResult {
    n_units: usize,
    n_times: usize,
    per_un: Option<Vec<f64>>,
    per_time: Vec<f64>,
    total: f64,
    pub diagnostics: Diagnostics,
}

impl LoglikResult {
    /// Builds a result from per-`(u, n)` estimates stored with time outer, unit inner.
    pub fn from_per_un(n_units: usize, n_times: usize, per_un: Vec<f64>, diagnostics: Diagnostics) -> Self {
        assert_eq!(per_un.len(), n_units * n_times);
        let mut total = 0.0;
        let mut per_time = Vec::with_capacity(n_times);
        for n in 0..n_times {
            let mut s = 0.0;
            for u in 0..n_units {
                let v = per_un[n * n_units + u];
                total += v;
                s += v;
            }
            per_time.push(s);
        }
        Self {
            n_units,
            n_times,
            per_un: Some(per_un),
            per_time,
            total,
            diagnostics,
        }
    }

    /// Builds a result that only resolves conditional log likelihoods per time.
    pub fn from_per_time(n_units: usize, per_time: Vec<f64>, diagnostics: Diagnostics) -> Self {
        let total = per_time.iter().fold(0.0, |a, b| a + b);
        Self {
            n_units,
            n_times: per_time.len(),
            per_un: None,
            per_time,
            total,
            diagnostics,
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    /// `total / (U * N)`.
    pub fn per_unit_time(&self) -> f64 {
        self.total / (self.n_units * self.n_times) as f64
    }

    pub fn per_time(&self) -> &[f64] {
        &self.per_time
    }

    pub fn per_un(&self) -> Option<&[f64]> {
        self.per_un.as_deref()
    }

    /// Estimate for observation `(u, n)`, when resolved per unit.
    pub fn get(&self, u: usize, n: usize) -> Option<f64> {
        self.per_un.as_ref().map(|v| v[n * self.n_units + u])
    }
}
