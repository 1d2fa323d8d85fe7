//! Stochastic Lorenz-96 on a ring, integrated by Euler-Maruyama.

use crate::core::{RngStream, SpatPompDims, SpatPompModel};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Lorenz96Params {
    pub forcing: f64,
    pub sigma_p: f64,
    pub tau: f64,
    pub dt_euler: f64,
    /// Time the initial state is run forward before `t_0`, to skip the transient.
    pub burn_in: f64,
}

impl Default for Lorenz96Params {
    fn default() -> Self {
        Self {
            forcing: 8.0,
            sigma_p: 1.0,
            tau: 1.0,
            dt_euler: 0.005,
            burn_in: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lorenz96 {
    dims: SpatPompDims,
    params: Lorenz96Params,
}

impl Lorenz96 {
    /// Observations at `t_n = n`.
    pub fn new(n_units: usize, n_times: usize, params: Lorenz96Params) -> Result<Self> {
        Self::with_dims(SpatPompDims::regular(n_units, n_times, 0.0, 1.0)?, params)
    }

    pub fn with_dims(dims: SpatPompDims, params: Lorenz96Params) -> Result<Self> {
        if dims.n_units() < 4 {
            return Err(Error::config("Lorenz-96 needs at least 4 units"));
        }
        if !(params.dt_euler > 0.0) || !(params.tau > 0.0) || params.sigma_p < 0.0 || params.burn_in < 0.0 {
            return Err(Error::config(format!("invalid Lorenz-96 parameters {params:?}")));
        }
        Ok(Self { dims, params })
    }

    pub fn params(&self) -> &Lorenz96Params {
        &self.params
    }

    /// `(x[u+1] - x[u-2]) x[u-1] - x[u] + F`, indices mod U.
    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        let u = x.len();
        for k in 0..u {
            let next = x[(k + 1) % u];
            let prev = x[(k + u - 1) % u];
            let prev2 = x[(k + u - 2) % u];
            out[k] = (next - prev2) * prev - x[k] + self.params.forcing;
        }
    }

    fn n_steps(&self, span: f64) -> usize {
        ((span / self.params.dt_euler) - 1e-9).ceil().max(1.0) as usize
    }

    fn integrate(&self, x: &mut [f64], span: f64, mut rng: Option<&mut RngStream>) {
        if span <= 0.0 {
            return;
        }
        let steps = self.n_steps(span);
        let h = span / steps as f64;
        let noise = self.params.sigma_p * h.sqrt();
        let mut d = vec![0.0; x.len()];
        for _ in 0..steps {
            self.drift(x, &mut d);
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di * h;
            }
            if let Some(rng) = rng.as_deref_mut() {
                for xi in x.iter_mut() {
                    *xi += noise * rng.normal();
                }
            }
        }
    }
}

impl SpatPompModel for Lorenz96 {
    /// The measurement standard deviation.
    type Theta = f64;

    fn dims(&self) -> &SpatPompDims {
        &self.dims
    }

    fn unit_dim(&self) -> usize {
        1
    }

    fn theta(&self) -> f64 {
        self.params.tau
    }

    fn simulate_initial(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.dims.n_units()).map(|_| 5.0 + 2.0 * rng.normal()).collect();
        self.integrate(&mut x, self.params.burn_in, Some(rng));
        x
    }

    fn simulate_transition(&self, x: &mut [f64], t_a: f64, t_b: f64, rng: &mut RngStream) {
        self.integrate(x, t_b - t_a, Some(rng));
    }

    fn measurement_logdensity(&self, _u: usize, _n: usize, y: f64, x_u: &[f64], tau: &f64) -> f64 {
        let r = (y - x_u[0]) / tau;
        -0.5 * (LN_2PI + r * r) - tau.ln()
    }

    fn simulate_measurement(&self, _u: usize, _n: usize, x_u: &[f64], rng: &mut RngStream) -> f64 {
        x_u[0] + self.params.tau * rng.normal()
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

    /// The deterministic skeleton, integrated with the same Euler step.
    fn forecast_mean(&self, x: &[f64], s: f64, t: f64) -> Vec<f64> {
        let mut m = x.to_vec();
        self.integrate(&mut m, t - s, None);
        m
    }
}
