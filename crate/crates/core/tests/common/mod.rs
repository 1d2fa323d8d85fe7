#![allow(dead_code)]

use spatfilter::core::{log_sum_exp, LogWeightTensor, ResolvedNeighborhoods};

/// Conditional log likelihoods evaluated directly from every stored
/// measurement weight, with no streaming state. Time outer, unit inner.
///
/// Sums are formed in the order the streaming filters use, so the two agree
/// to the last bit.
pub fn abf_stored_weights_reference(w: &LogWeightTensor, nb: &ResolvedNeighborhoods, floor: f64) -> Vec<f64> {
    let [n_units, n_times, r, j] = w.dims();
    let ln_j = (j as f64).ln();
    let sum_over = |units: &[usize], n: usize, i: usize, q: usize| units.iter().fold(0.0, |a, &v| a + w.get(v, n, i, q));
    let mut out = Vec::with_capacity(n_units * n_times);
    for n in 0..n_times {
        for u in 0..n_units {
            let mut num = Vec::with_capacity(r);
            let mut den = Vec::with_capacity(r);
            for i in 0..r {
                let mut past = 0.0;
                let mut cur = vec![0.0; j];
                for g in nb.groups(u, n) {
                    let m = n - g.lag;
                    let sums: Vec<f64> = (0..j).map(|q| sum_over(&g.units, m, i, q)).collect();
                    if g.lag == 0 {
                        cur = sums;
                    } else {
                        past += log_sum_exp(&sums) - ln_j;
                    }
                }
                let joint: Vec<f64> = (0..j).map(|q| w.get(u, n, i, q) + cur[q]).collect();
                num.push(past + (log_sum_exp(&joint) - ln_j));
                den.push(past + (log_sum_exp(&cur) - ln_j));
            }
            let v = log_sum_exp(&num) - log_sum_exp(&den);
            out.push(if v.is_finite() { v } else { floor });
        }
    }
    out
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
