//! The plug-and-play model contract.

use std::fmt::Debug;

use super::dims::SpatPompDims;
use super::rng::{rng_substream, Purpose, RngStream};
use crate::error::{Error, Result};

/// A spatiotemporal partially observed Markov process.
///
/// The latent state is a flat vector holding `unit_dim()` values per unit, so
/// the slice for unit `u` is `x[u * d..(u + 1) * d]`. Filters only simulate
/// the latent process and evaluate unit-level measurement densities; no
/// transition density is ever required.
///
/// The moment methods (`measurement_mean`, `measurement_var`, `var_to_theta`,
/// `forecast_mean`) feed the simulated-moment guide and the ensemble Kalman
/// filter.
pub trait SpatPompModel: Sync {
    /// Measurement parameters, the part of the model that `var_to_theta` rewrites.
    type Theta: Clone + Debug + Send + Sync;

    fn dims(&self) -> &SpatPompDims;

    fn unit_dim(&self) -> usize;

    fn theta(&self) -> Self::Theta;

    fn simulate_initial(&self, rng: &mut RngStream) -> Vec<f64>;

    /// Advances `x` from `t_a` to `t_b`. Must leave `x` untouched when `t_a == t_b`.
    fn simulate_transition(&self, x: &mut [f64], t_a: f64, t_b: f64, rng: &mut RngStream);

    /// `log f(y_{u,n} | x_u; theta)`.
    fn measurement_logdensity(&self, u: usize, n: usize, y: f64, x_u: &[f64], theta: &Self::Theta) -> f64;

    fn simulate_measurement(&self, u: usize, n: usize, x_u: &[f64], rng: &mut RngStream) -> f64;

    /// `E[Y_{u,n} | X_{u,n} = x_u]`.
    fn measurement_mean(&self, u: usize, n: usize, x_u: &[f64]) -> f64;

    /// `Var(Y_{u,n} | X_{u,n} = x_u; theta)`.
    fn measurement_var(&self, u: usize, n: usize, x_u: &[f64], theta: &Self::Theta) -> f64;

    /// Measurement parameters giving variance `v` at `x_u`. The flag is set when
    /// `v` is outside the representable range and the result was clamped.
    fn var_to_theta(&self, u: usize, n: usize, v: f64, x_u: &[f64], theta: &Self::Theta) -> (Self::Theta, bool);

    /// Deterministic approximation of `E[X(t) | X(s) = x]`. Returns `x` when `s == t`.
    fn forecast_mean(&self, x: &[f64], s: f64, t: f64) -> Vec<f64>;

    /// Maps an arbitrary real vector back into the state space, e.g. after an
    /// ensemble Kalman update. Identity by default.
    fn project_state(&self, _x: &mut [f64]) {}

    fn unit_state<'a>(&self, x: &'a [f64], u: usize) -> &'a [f64] {
        let d = self.unit_dim();
        &x[u * d..(u + 1) * d]
    }
}

/// Observations `y[n][u]`, stored with time outer.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    n_units: usize,
    n_times: usize,
    values: Vec<f64>,
}

impl Observations {
    pub fn new(n_units: usize, n_times: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_units * n_times {
            return Err(Error::Dimension(format!(
                "{} observations for {n_units} units x {n_times} times",
                values.len()
            )));
        }
        Ok(Self {
            n_units,
            n_times,
            values,
        })
    }

    pub fn get(&self, u: usize, n: usize) -> f64 {
        self.values[n * self.n_units + u]
    }

    /// All units at time `n`.
    pub fn at_time(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_units..(n + 1) * self.n_units]
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn check_against(&self, dims: &SpatPompDims) -> Result<()> {
        if self.n_units != dims.n_units() || self.n_times != dims.n_times() {
            return Err(Error::Dimension(format!(
                "data are {} x {}, model is {} x {}",
                self.n_units,
                self.n_times,
                dims.n_units(),
                dims.n_times()
            )));
        }
        Ok(())
    }
}

/// A simulated (or loaded) dataset: observations plus, when known, the latent path.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub obs: Observations,
    /// Latent states at `obs_times[0..=N]`, when known.
    pub latent: Option<Vec<Vec<f64>>>,
}

/// Simulates one latent path and its observations from `model`.
pub fn simulate_dataset<M: SpatPompModel>(model: &M, seed: u64) -> Dataset {
    let dims = model.dims();
    let (n_units, n_times) = (dims.n_units(), dims.n_times());
    let mut rng = rng_substream(seed, 0, 0, Purpose::Dataset, 0);
    let mut x = model.simulate_initial(&mut rng);
    let mut latent = vec![x.clone()];
    let mut values = Vec::with_capacity(n_units * n_times);
    for n in 0..n_times {
        let mut step = rng_substream(seed, 0, n, Purpose::Dataset, 1);
        model.simulate_transition(&mut x, dims.interval_start(n), dims.obs_time(n), &mut step);
        let mut meas = rng_substream(seed, 0, n, Purpose::Measure, 0);
        for u in 0..n_units {
            values.push(model.simulate_measurement(u, n, model.unit_state(&x, u), &mut meas));
        }
        latent.push(x.clone());
    }
    Dataset {
        obs: Observations::new(n_units, n_times, values).expect("shape"),
        latent: Some(latent),
    }
}
