//! Monte Carlo adjusted profile (MCAP-style) confidence intervals.
//!
//! A quadratic is fitted by tricube-weighted least squares around the best
//! point. With the fit `-a (g - b)^2 + c`, the interval is
//! `b +/- sqrt(cutoff / a)` where
//!
//! ```text
//! cutoff = chi2_1(level) * (a * se_b^2 + 1/2)
//! ```
//!
//! and `se_b` is the Monte Carlo standard error of the fitted maximizer,
//! propagated from the per-point standard errors.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::slice::ProfilePoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct McapInterval {
    pub lo: f64,
    pub hi: f64,
    /// Maximizer of the smoothed profile.
    pub mle: f64,
    pub max_loglik: f64,
    pub cutoff: f64,
    /// Monte Carlo standard error of `mle`.
    pub se_mle: f64,
    /// The smoothed profile on an even grid over the data range.
    pub curve: Vec<(f64, f64)>,
}

struct Fit {
    center: f64,
    beta: DVector<f64>,
    cov: DMatrix<f64>,
}

fn tricube(d: f64) -> f64 {
    if d >= 1.0 {
        0.0
    } else {
        (1.0 - d * d * d).powi(3)
    }
}

/// Weighted quadratic in `g - center`, with the sandwich covariance of its coefficients.
fn local_quadratic(points: &[&ProfilePoint], center: f64, span: f64) -> Option<Fit> {
    let w: Vec<f64> = points.iter().map(|p| tricube((p.value - center).abs() / span)).collect();
    if w.iter().filter(|v| **v > 0.0).count() < 3 {
        return None;
    }
    let x = DMatrix::from_fn(points.len(), 3, |i, j| (points[i].value - center).powi(j as i32));
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.loglik));
    let wx = DMatrix::from_fn(points.len(), 3, |i, j| w[i] * x[(i, j)]);
    let xtwx = x.transpose() * &wx;
    let inv = xtwx.try_inverse()?;
    let beta = &inv * (wx.transpose() * y);
    let noise = DMatrix::from_diagonal(&DVector::from_iterator(points.len(), points.iter().map(|p| p.mc_se * p.mc_se)));
    let cov = &inv * (wx.transpose() * noise * &wx) * &inv;
    Some(Fit { center, beta, cov })
}

/// MCAP-style interval at confidence `level` from at least five profile points.
///
/// Fails with [`Error::UnboundedInterval`] when the smoothed profile is not
/// concave near its maximum even after widening the span once.
pub fn mcap_interval(points: &[ProfilePoint], level: f64) -> Result<McapInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("confidence level {level} outside (0, 1)")));
    }
    let mut pts: Vec<&ProfilePoint> = points.iter().filter(|p| p.loglik.is_finite()).collect();
    if pts.len() < 5 {
        return Err(Error::UnboundedInterval);
    }
    pts.sort_by(|a, b| a.value.total_cmp(&b.value));
    let best = pts.iter().copied().max_by(|a, b| a.loglik.total_cmp(&b.loglik)).expect("nonempty");
    let center = best.value;

    // distance to the farthest of the better half of the points
    let mut by_ll = pts.clone();
    by_ll.sort_by(|a, b| b.loglik.total_cmp(&a.loglik));
    let top = (pts.len().div_ceil(2)).max(3);
    let reach = by_ll[..top].iter().map(|p| (p.value - center).abs()).fold(0.0, f64::max);
    let full = pts.iter().map(|p| (p.value - center).abs()).fold(0.0, f64::max);

    // curvature must be distinguishable from rounding noise over the span
    let concave = |span: f64| {
        local_quadratic(&pts, center, span).filter(|f| -f.beta[2] * span * span > 1e-9 * (1.0 + f.beta[0].abs()))
    };
    let fit = concave(reach * 1.5)
        .or_else(|| concave(full * 1.5))
        .ok_or(Error::UnboundedInterval)?;

    let (b1, b2) = (fit.beta[1], fit.beta[2]);
    let a = -b2;
    let shift = -b1 / (2.0 * b2);
    let mle = fit.center + shift;
    let max_loglik = fit.beta[0] + b1 * shift + b2 * shift * shift;
    // gradient of the vertex location in (b0, b1, b2)
    let grad = DVector::from_vec(vec![0.0, -1.0 / (2.0 * b2), b1 / (2.0 * b2 * b2)]);
    let se_mle = (grad.transpose() * &fit.cov * &grad)[(0, 0)].max(0.0).sqrt();
    let chi2 = ChiSquared::new(1.0).expect("one degree of freedom").inverse_cdf(level);
    let cutoff = chi2 * (a * se_mle * se_mle + 0.5);
    let half = (cutoff / a).sqrt();

    let (g0, g1) = (pts[0].value, pts[pts.len() - 1].value);
    let curve = (0..=100)
        .map(|i| {
            let g = g0 + (g1 - g0) * i as f64 / 100.0;
            let d = g - fit.center;
            (g, fit.beta[0] + b1 * d + b2 * d * d)
        })
        .collect();
    Ok(McapInterval {
        lo: mle - half,
        hi: mle + half,
        mle,
        max_loglik,
        cutoff,
        se_mle,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(f: impl Fn(f64) -> f64, se: f64) -> Vec<ProfilePoint> {
        (0..11)
            .map(|i| {
                let g = i as f64 * 0.4;
                ProfilePoint {
                    value: g,
                    loglik: f(g),
                    mc_se: se,
                    params: vec![g],
                    replicates: vec![],
                }
            })
            .collect()
    }

    #[test]
    fn exact_quadratic_gives_the_chi_square_interval() {
        let ci = mcap_interval(&points(|g| -(g - 2.0).powi(2), 0.0), 0.95).unwrap();
        let half = 1.920_729_410_347_062_f64.sqrt();
        assert!((ci.lo - (2.0 - half)).abs() < 1e-6);
        assert!((ci.hi - (2.0 + half)).abs() < 1e-6);
        assert!((ci.mle - 2.0).abs() < 1e-9);
    }

    #[test]
    fn flat_profile_is_unbounded() {
        assert!(matches!(mcap_interval(&points(|_| -3.0, 0.1), 0.95), Err(Error::UnboundedInterval)));
    }

    #[test]
    fn monte_carlo_error_widens_the_interval() {
        let exact = mcap_interval(&points(|g| -(g - 2.0).powi(2), 0.0), 0.95).unwrap();
        let noisy = mcap_interval(&points(|g| -(g - 2.0).powi(2), 0.5), 0.95).unwrap();
        assert!(noisy.se_mle > 0.0);
        assert!(noisy.hi - noisy.lo > exact.hi - exact.lo);
    }

    #[test]
    fn too_few_points_is_unbounded() {
        let p = points(|g| -(g - 2.0).powi(2), 0.0);
        assert!(matches!(mcap_interval(&p[..4], 0.95), Err(Error::UnboundedInterval)));
    }
}
