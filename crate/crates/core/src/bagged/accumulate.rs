//! Streaming accumulation of the prediction weights.
//!
//! For observation `(u, n)` and replicate `i`, the prediction weight of
//! particle `j` factors as a product over earlier times of per-time particle
//! means, times a current-time term that depends on `j`:
//!
//! ```text
//! w^P_{u,n,i,j} = prod_{k >= 1} gamma_{u,n,i,k} * prod_{v in B_{u,n}, lag 0} w^M_{v,n,i,j}
//! gamma_{u,n,i,k} = mean_q prod_{v in B_{u,n}, lag k} w^M_{v,n-k,i,q}
//! ```
//!
//! The past factors are known as soon as time `n - k` has been filtered, so
//! each replicate keeps one running log sum per (target, future time) in a
//! ring of `K + 1` slots instead of storing every measurement weight. All sums
//! are formed in a fixed order: past terms in increasing time, units in
//! increasing index, so the streaming values match a direct evaluation from
//! stored weights to the last bit.

use crate::core::{log_sum_exp, LagGroup, ResolvedNeighborhoods};

/// `log mean_q exp(sum_{v in units} wm[v][q])`, with `wm` unit-major over `j` particles.
pub(crate) fn log_group_mean(units: &[usize], wm: &[f64], j: usize, buf: &mut Vec<f64>) -> f64 {
    group_sums(units, wm, j, buf);
    log_sum_exp(buf) - (j as f64).ln()
}

/// `buf[q] = sum_{v in units} wm[v][q]`, summed from 0.0 in unit order.
pub(crate) fn group_sums(units: &[usize], wm: &[f64], j: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend((0..j).map(|q| units.iter().fold(0.0, |a, &v| a + wm[v * j + q])));
}

/// Past log factors per target, for the next `K` observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaAccumulator {
    n_targets: usize,
    slots: usize,
    pending: Vec<f64>,
}

impl GammaAccumulator {
    pub fn new(n_targets: usize, max_lag: usize) -> Self {
        let slots = max_lag + 1;
        Self {
            n_targets,
            slots,
            pending: vec![0.0; n_targets * slots],
        }
    }

    fn slot(&self, target: usize, m: usize) -> usize {
        target * self.slots + m % self.slots
    }

    /// Returns and clears the accumulated past log factor of `target` at time `m`.
    pub fn take(&mut self, target: usize, m: usize) -> f64 {
        let k = self.slot(target, m);
        std::mem::replace(&mut self.pending[k], 0.0)
    }

    pub fn add(&mut self, target: usize, m: usize, log_gamma: f64) {
        let k = self.slot(target, m);
        self.pending[k] += log_gamma;
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    /// Memory held, in floats.
    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}

/// Emits `log sum_j w^M w^P` and `log sum_j w^P` (both up to the common
/// factor `J`) for every unit at time `n`, then folds time `n` into the
/// past factors of later targets.
pub(crate) fn likelihood_terms(
    acc: &mut GammaAccumulator,
    nb: &ResolvedNeighborhoods,
    n: usize,
    wm: &[f64],
    j: usize,
    num: &mut [f64],
    den: &mut [f64],
) {
    let n_units = nb.n_units();
    let ln_j = (j as f64).ln();
    let mut cur = Vec::with_capacity(j);
    let mut buf = Vec::with_capacity(j);
    for u in 0..n_units {
        let past = acc.take(u, n);
        match current_group(nb.groups(u, n)) {
            Some(g) => group_sums(&g.units, wm, j, &mut cur),
            None => {
                cur.clear();
                cur.resize(j, 0.0);
            }
        }
        buf.clear();
        buf.extend((0..j).map(|q| wm[u * j + q] + cur[q]));
        num[u] = past + (log_sum_exp(&buf) - ln_j);
        den[u] = past + (log_sum_exp(&cur) - ln_j);
    }
    for lag in 1..=nb.max_lag() {
        let m = n + lag;
        if m >= nb.n_times() {
            break;
        }
        for u in 0..n_units {
            if let Some(g) = nb.group_at_lag(u, m, lag) {
                let lg = log_group_mean(&g.units, wm, j, &mut buf);
                acc.add(u, m, lg);
            }
        }
    }
}

pub(crate) fn current_group(groups: &[LagGroup]) -> Option<&LagGroup> {
    groups.last().filter(|g| g.lag == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_slots_are_reused_after_take() {
        let mut acc = GammaAccumulator::new(2, 2);
        acc.add(1, 4, 0.5);
        acc.add(1, 4, 0.25);
        assert_eq!(acc.take(1, 4), 0.75);
        assert_eq!(acc.take(1, 4), 0.0);
        assert_eq!(acc.take(0, 4), 0.0);
        assert_eq!(acc.len(), 6);
    }

    #[test]
    fn group_mean_of_single_particle_is_the_sum() {
        let wm = [0.5, -1.0, 2.0];
        let mut buf = Vec::new();
        assert_eq!(log_group_mean(&[0, 2], &wm, 1, &mut buf), 2.5);
    }
}
