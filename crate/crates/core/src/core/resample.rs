use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::weights::{effective_sample_size, Diagnostics};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleScheme {
    #[default]
    Systematic,
    Multinomial,
}

/// Weights relative to the maximum, and their sum. `None` when all are `-inf`.
fn relative_weights(log_weights: &[f64]) -> Option<(Vec<f64>, f64)> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|v| (v - max).exp()).collect();
    let total = w.iter().sum();
    Some((w, total))
}

fn cumulative(w: &[f64], scale: f64) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|x| {
            acc += x;
            acc * scale
        })
        .collect()
}

/// Draws `log_weights.len()` ancestor indices (zero-based).
pub fn resample_indices(
    log_weights: &[f64],
    scheme: ResampleScheme,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    let j = log_weights.len();
    assert!(j > 0, "resampling an empty pool");
    let (w, total) = relative_weights(log_weights).ok_or(Error::DegenerateWeights {
        unit: None,
        time: 0,
    })?;
    let out = match scheme {
        ResampleScheme::Systematic => {
            // cumulative weights in units of 1/J of the total
            let cum = cumulative(&w, j as f64 / total);
            let offset = rng.uniform();
            let mut idx = 0;
            (0..j)
                .map(|k| {
                    let pos = k as f64 + offset;
                    while idx < j - 1 && cum[idx] <= pos {
                        idx += 1;
                    }
                    idx
                })
                .collect()
        }
        ResampleScheme::Multinomial => {
            let cum = cumulative(&w, 1.0 / total);
            (0..j).map(|_| search(&cum, rng.uniform())).collect()
        }
    };
    Ok(out)
}

fn search(cum: &[f64], u: f64) -> usize {
    let i = cum.partition_point(|&c| c <= u);
    i.min(cum.len() - 1)
}

/// Draws a single index with probability proportional to `exp(log_weights)`.
pub fn sample_index(log_weights: &[f64], rng: &mut RngStream) -> Result<usize> {
    let (w, total) = relative_weights(log_weights).ok_or(Error::DegenerateWeights {
        unit: None,
        time: 0,
    })?;
    let cum = cumulative(&w, 1.0 / total);
    Ok(search(&cum, rng.uniform()))
}

/// [`resample_indices`] with the uniform fallback for degenerate pools.
pub(crate) fn resample_or_uniform(
    log_weights: &[f64],
    scheme: ResampleScheme,
    rng: &mut RngStream,
    diag: &mut Diagnostics,
) -> Vec<usize> {
    diag.record_ess(effective_sample_size(log_weights));
    match resample_indices(log_weights, scheme, rng) {
        Ok(idx) => idx,
        Err(_) => {
            diag.degenerate_weight_events += 1;
            let flat = vec![0.0; log_weights.len()];
            resample_indices(&flat, scheme, rng).expect("flat weights")
        }
    }
}

/// [`sample_index`] with the uniform fallback for degenerate pools.
pub(crate) fn sample_or_uniform(log_weights: &[f64], rng: &mut RngStream, diag: &mut Diagnostics) -> usize {
    diag.record_ess(effective_sample_size(log_weights));
    match sample_index(log_weights, rng) {
        Ok(i) => i,
        Err(_) => {
            diag.degenerate_weight_events += 1;
            let flat = vec![0.0; log_weights.len()];
            sample_index(&flat, rng).expect("flat weights")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::rng::{rng_substream, Purpose};
    use proptest::prelude::*;

    fn rng(seed: u64) -> RngStream {
        rng_substream(seed, 0, 0, Purpose::Resample, 0)
    }

    #[test]
    fn systematic_equal_weights_is_identity() {
        for j in 1..50 {
            let idx = resample_indices(&vec![-1.3; j], ResampleScheme::Systematic, &mut rng(j as u64)).unwrap();
            assert_eq!(idx, (0..j).collect::<Vec<_>>());
        }
    }

    #[test]
    fn zero_weight_excluded() {
        for scheme in [ResampleScheme::Systematic, ResampleScheme::Multinomial] {
            let idx = resample_indices(&[0.0, f64::NEG_INFINITY], scheme, &mut rng(3)).unwrap();
            assert_eq!(idx, vec![0, 0]);
        }
    }

    #[test]
    fn all_zero_is_degenerate() {
        let w = [f64::NEG_INFINITY; 4];
        assert!(resample_indices(&w, ResampleScheme::Systematic, &mut rng(1)).is_err());
        assert!(sample_index(&w, &mut rng(1)).is_err());
        let mut diag = Diagnostics::default();
        let idx = resample_or_uniform(&w, ResampleScheme::Systematic, &mut rng(1), &mut diag);
        assert_eq!(idx.len(), 4);
        assert_eq!(diag.degenerate_weight_events, 1);
    }

    #[test]
    fn multinomial_golden() {
        let w = [0.5f64.ln(), 0.5f64.ln()];
        let idx = resample_indices(&w, ResampleScheme::Multinomial, &mut rng(2024)).unwrap();
        let again = resample_indices(&w, ResampleScheme::Multinomial, &mut rng(2024)).unwrap();
        assert_eq!(idx, again);
        assert_eq!(idx, GOLDEN_MULTINOMIAL.to_vec());
    }

    // frozen from the first run with master seed 2024, key (0, 0, Resample, 0)
    const GOLDEN_MULTINOMIAL: [usize; 2] = [0, 1];

    #[test]
    fn multinomial_frequencies() {
        let w = [0.1f64.ln(), 0.6f64.ln(), 0.3f64.ln()];
        let mut counts = [0usize; 3];
        let mut r = rng(9);
        for _ in 0..2000 {
            for i in resample_indices(&w, ResampleScheme::Multinomial, &mut r).unwrap() {
                counts[i] += 1;
            }
        }
        let total = 6000.0;
        for (c, p) in counts.iter().zip([0.1f64, 0.6, 0.3]) {
            let se = (p * (1.0 - p) / total).sqrt();
            assert!((*c as f64 / total - p).abs() < 4.0 * se);
        }
    }

    proptest! {
        #[test]
        fn systematic_counts_within_one_of_expected(
            w in prop::collection::vec(0.01f64..10.0, 1..30), seed in 0u64..1000,
        ) {
            let logw: Vec<f64> = w.iter().map(|x| x.ln()).collect();
            let j = w.len();
            let total: f64 = w.iter().sum();
            let idx = resample_indices(&logw, ResampleScheme::Systematic, &mut rng(seed)).unwrap();
            prop_assert_eq!(idx.len(), j);
            prop_assert!(idx.windows(2).all(|p| p[0] <= p[1]));
            for (i, wi) in w.iter().enumerate() {
                let expected = wi / total * j as f64;
                let count = idx.iter().filter(|&&k| k == i).count() as f64;
                prop_assert!((count - expected).abs() < 1.0 + 1e-9);
            }
        }
    }
}
