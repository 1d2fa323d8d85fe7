//! Correlated Brownian motion on a circle of units, `X(t) = Omega W(t)`,
//! observed with independent Gaussian noise.

use nalgebra::{DMatrix, DVector};

use crate::baselines::kalman::LinearGaussianSystem;
use crate::core::{circle_distance, RngStream, SpatPompDims, SpatPompModel};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
pub struct CorrelatedBm {
    dims: SpatPompDims,
    rho: f64,
    tau: f64,
    /// `Omega[u][v] = rho^dist(u, v)`, row-major.
    omega: Vec<f64>,
}

impl CorrelatedBm {
    /// Observations at `t_n = n`, starting from `X_0 = 0`.
    pub fn new(n_units: usize, n_times: usize, rho: f64, tau: f64) -> Result<Self> {
        Self::with_dims(SpatPompDims::regular(n_units, n_times, 0.0, 1.0)?, rho, tau)
    }

    pub fn with_dims(dims: SpatPompDims, rho: f64, tau: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::config(format!("rho = {rho} must lie in [0, 1)")));
        }
        if !(tau > 0.0) {
            return Err(Error::config(format!("tau = {tau} must be positive")));
        }
        let u = dims.n_units();
        let omega = (0..u * u)
            .map(|k| rho.powi(circle_distance(k / u, k % u, u) as i32))
            .collect();
        Ok(Self { dims, rho, tau, omega })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn omega(&self) -> DMatrix<f64> {
        let u = self.dims.n_units();
        DMatrix::from_row_slice(u, u, &self.omega)
    }

    /// The exact linear-Gaussian form, assuming equally spaced observations.
    pub fn kalman_system(&self) -> LinearGaussianSystem {
        let u = self.dims.n_units();
        let dt = self.dims.obs_time(0) - self.dims.t0();
        let omega = self.omega();
        LinearGaussianSystem {
            f: DMatrix::identity(u, u),
            q: &omega * omega.transpose() * dt,
            h: DMatrix::identity(u, u),
            r: DMatrix::identity(u, u) * (self.tau * self.tau),
            x0: DVector::zeros(u),
            p0: DMatrix::zeros(u, u),
        }
    }
}

impl SpatPompModel for CorrelatedBm {
    /// The measurement standard deviation.
    type Theta = f64;

    fn dims(&self) -> &SpatPompDims {
        &self.dims
    }

    fn unit_dim(&self) -> usize {
        1
    }

    fn theta(&self) -> f64 {
        self.tau
    }

    fn simulate_initial(&self, _rng: &mut RngStream) -> Vec<f64> {
        vec![0.0; self.dims.n_units()]
    }

    fn simulate_transition(&self, x: &mut [f64], t_a: f64, t_b: f64, rng: &mut RngStream) {
        if t_b <= t_a {
            return;
        }
        let u = x.len();
        let scale = (t_b - t_a).sqrt();
        let z: Vec<f64> = (0..u).map(|_| rng.normal()).collect();
        for (a, row) in x.iter_mut().zip(self.omega.chunks_exact(u)) {
            let dot: f64 = row.iter().zip(&z).map(|(o, z)| o * z).sum();
            *a += scale * dot;
        }
    }

    fn measurement_logdensity(&self, _u: usize, _n: usize, y: f64, x_u: &[f64], tau: &f64) -> f64 {
        let r = (y - x_u[0]) / tau;
        -0.5 * (LN_2PI + r * r) - tau.ln()
    }

    fn simulate_measurement(&self, _u: usize, _n: usize, x_u: &[f64], rng: &mut RngStream) -> f64 {
        x_u[0] + self.tau * rng.normal()
    }

    fn measurement_mean(&self, _u: usize, _n: usize, x_u: &[f64]) -> f64 {
        x_u[0]
    }

    fn measurement_var(&self, _u: usize, _n: usize, _x_u: &[f64], tau: &f64) -> f64 {
        tau * tau
    }

    fn var_to_theta(&self, _u: usize, _n: usize, v: f64, _x_u: &[f64], _tau: &f64) -> (f64, bool) {
        if v > 0.0 {
            (v.sqrt(), false)
        } else {
            (f64::MIN_POSITIVE.sqrt(), true)
        }
    }

    fn forecast_mean(&self, x: &[f64], _s: f64, _t: f64) -> Vec<f64> {
        x.to_vec()
    }
}
