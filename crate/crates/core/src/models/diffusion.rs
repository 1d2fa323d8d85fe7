//! Adapted simulation for a one-dimensional Euler diffusion
//! `X_{n+1} = X_n + mu(X_n) delta + sigma sqrt(delta) eps`, with `mu(x) = -a x`.
//!
//! Three measurement scalings are compared:
//!
//! - `M1`: the increment is observed, `Y = mu(X_n) delta + sigma sqrt(delta) eps + tau sqrt(delta) eta`;
//! - `M2`: `Y = X_{n+1} + tau / sqrt(delta) eta`;
//! - `M3`: `Y = X_{n+1} + tau eta`.
//!
//! The adapted process `A` draws each step from `X_{n+1} | Y_{n+1}, X_n = A_n`.
//! It tracks `X` under `M1` and `M3` but drifts away under `M2`, whose data
//! contribution to each step is `O(delta^2)`.

use rayon::prelude::*;

use crate::core::{rng_substream, Purpose};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Regime {
    M1,
    M2,
    M3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionToy {
    /// Mean-reversion rate `a >= 0` of the drift `mu(x) = -a x`.
    pub a: f64,
    pub sigma: f64,
    pub tau: f64,
    pub delta: f64,
    pub regime: Regime,
}

impl DiffusionToy {
    pub fn validate(&self) -> Result<()> {
        if self.a < 0.0 || !(self.sigma > 0.0) || self.tau < 0.0 || !(self.delta > 0.0) {
            return Err(Error::config(format!("invalid diffusion toy {self:?}")));
        }
        Ok(())
    }

    fn drift(&self, x: f64) -> f64 {
        -self.a * x
    }

    /// Weight given to the data in `E[X_{n+1} | Y_{n+1}, X_n]`.
    pub fn adapted_gain(&self) -> f64 {
        let (s2, t2, d) = (self.sigma * self.sigma, self.tau * self.tau, self.delta);
        match self.regime {
            Regime::M1 => s2 / (s2 + t2),
            Regime::M2 => s2 * d * d / (s2 * d * d + t2),
            Regime::M3 => s2 * d / (s2 * d + t2),
        }
    }

    /// `Var[X_{n+1} | Y_{n+1}, X_n]`.
    pub fn adapted_variance(&self) -> f64 {
        self.sigma * self.sigma * self.delta * (1.0 - self.adapted_gain())
    }

    /// Simulates `n_paths` pairs `(X, A)` from `X_0 = A_0 = 0` and returns the
    /// mean squared tracking error `E[(A_n - X_n)^2]` for `n = 1..=n_steps`.
    pub fn tracking_error(&self, n_paths: usize, n_steps: usize, seed: u64) -> Vec<f64> {
        let g = self.adapted_gain();
        let cond_sd = self.adapted_variance().sqrt();
        let (sd_step, d) = (self.sigma * self.delta.sqrt(), self.delta);
        let per_path: Vec<Vec<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = rng_substream(seed, p as u64, 0, Purpose::Dataset, 0);
                let (mut x, mut a) = (0.0f64, 0.0f64);
                let mut err = Vec::with_capacity(n_steps);
                for _ in 0..n_steps {
                    let (eps, eta, zeta) = (rng.normal(), rng.normal(), rng.normal());
                    let x_next = x + self.drift(x) * d + sd_step * eps;
                    let a_pred = a + self.drift(a) * d;
                    let innovation = match self.regime {
                        Regime::M1 => {
                            let y = self.drift(x) * d + sd_step * eps + self.tau * d.sqrt() * eta;
                            y - self.drift(a) * d
                        }
                        Regime::M2 => x_next + self.tau / d.sqrt() * eta - a_pred,
                        Regime::M3 => x_next + self.tau * eta - a_pred,
                    };
                    a = a_pred + g * innovation + cond_sd * zeta;
                    x = x_next;
                    err.push((a - x) * (a - x));
                }
                err
            })
            .collect();
        (0..n_steps)
            .map(|n| per_path.iter().map(|e| e[n]).sum::<f64>() / n_paths as f64)
            .collect()
    }

    /// Closed-form `E[(A_n - X_n)^2]` under `M1` with linear drift.
    ///
    /// The error obeys `e_{n+1} = (1 - (1-g) a delta) e_n + noise`, with noise
    /// variance `2 delta sigma^2 tau^2 / (sigma^2 + tau^2)`.
    pub fn m1_error_variance(&self, n: usize) -> f64 {
        let g = self.adapted_gain();
        let c = 1.0 - (1.0 - g) * self.a * self.delta;
        let s2t2 = self.sigma * self.sigma * self.tau * self.tau;
        let q = 2.0 * self.delta * s2t2 / (self.sigma * self.sigma + self.tau * self.tau);
        if c == 1.0 {
            return q * n as f64;
        }
        q * (1.0 - c.powi(2 * n as i32)) / (1.0 - c * c)
    }
}
