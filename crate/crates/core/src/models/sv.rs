//! One-dimensional stochastic-volatility toy: a Gaussian random walk `X` seen
//! only through `Y | X ~ N(0, c^2 X^2)`.
//!
//! The observation mean does not depend on the state, so `cov(X, Y) = 0` and
//! any linear-Gaussian update (the EnKF in particular) learns nothing.

use crate::core::{RngStream, SpatPompDims, SpatPompModel};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LOG_DENSITY_FLOOR: f64 = -690.0;

#[derive(Debug, Clone)]
pub struct SvToy {
    dims: SpatPompDims,
    sigma_x: f64,
    scale: f64,
}

impl SvToy {
    pub fn new(n_times: usize, sigma_x: f64) -> Result<Self> {
        if !(sigma_x > 0.0) {
            return Err(Error::config("sigma_x must be positive"));
        }
        Ok(Self {
            dims: SpatPompDims::regular(1, n_times, 0.0, 1.0)?,
            sigma_x,
            scale: 1.0,
        })
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }
}

impl SpatPompModel for SvToy {
    /// `c` in `Y ~ N(0, c^2 X^2)`.
    type Theta = f64;

    fn dims(&self) -> &SpatPompDims {
        &self.dims
    }

    fn unit_dim(&self) -> usize {
        1
    }

    fn theta(&self) -> f64 {
        self.scale
    }

    fn simulate_initial(&self, _rng: &mut RngStream) -> Vec<f64> {
        vec![0.0]
    }

    fn simulate_transition(&self, x: &mut [f64], t_a: f64, t_b: f64, rng: &mut RngStream) {
        if t_b > t_a {
            x[0] += self.sigma_x * (t_b - t_a).sqrt() * rng.normal();
        }
    }

    fn measurement_logdensity(&self, _u: usize, _n: usize, y: f64, x_u: &[f64], c: &f64) -> f64 {
        let sd = (c * x_u[0]).abs();
        if sd == 0.0 {
            return if y == 0.0 { 0.0 } else { LOG_DENSITY_FLOOR };
        }
        let r = y / sd;
        -0.5 * (LN_2PI + r * r) - sd.ln()
    }

    fn simulate_measurement(&self, _u: usize, _n: usize, x_u: &[f64], rng: &mut RngStream) -> f64 {
        self.scale * x_u[0].abs() * rng.normal()
    }

    fn measurement_mean(&self, _u: usize, _n: usize, _x_u: &[f64]) -> f64 {
        0.0
    }

    fn measurement_var(&self, _u: usize, _n: usize, x_u: &[f64], c: &f64) -> f64 {
        c * c * x_u[0] * x_u[0]
    }

    fn var_to_theta(&self, _u: usize, _n: usize, v: f64, x_u: &[f64], c: &f64) -> (f64, bool) {
        let ax = x_u[0].abs();
        if ax == 0.0 || !(v > 0.0) {
            return (*c, true);
        }
        (v.sqrt() / ax, false)
    }

    fn forecast_mean(&self, x: &[f64], _s: f64, _t: f64) -> Vec<f64> {
        x.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_round_trip() {
        let m = SvToy::new(3, 1.0).unwrap();
        for (v, x) in [(0.5, 1.3), (4.0, -0.2), (1e-4, 7.0)] {
            let (c, clamped) = m.var_to_theta(0, 0, v, &[x], &1.0);
            assert!(!clamped);
            assert!((m.measurement_var(0, 0, &[x], &c) - v).abs() <= 1e-9 * v);
        }
        assert!(m.var_to_theta(0, 0, 1.0, &[0.0], &1.0).1);
    }

    #[test]
    fn density_integrates_to_one() {
        let m = SvToy::new(1, 1.0).unwrap();
        let h = 1e-3;
        let total: f64 = (-20_000..20_000)
            .map(|k| m.measurement_logdensity(0, 0, k as f64 * h, &[-1.5], &1.0).exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
