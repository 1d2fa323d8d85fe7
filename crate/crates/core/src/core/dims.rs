use crate::error::{Error, Result};

/// Number of units, number of observations and the observation time grid.
///
/// `obs_times` has `n_times + 1` entries: `obs_times[0]` is the initial time and
/// observation `n` (zero-based) is made at `obs_times[n + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatPompDims {
    n_units: usize,
    obs_times: Vec<f64>,
}

impl SpatPompDims {
    pub fn new(n_units: usize, obs_times: Vec<f64>) -> Result<Self> {
        if n_units == 0 {
            return Err(Error::config("need at least one unit"));
        }
        if obs_times.len() < 2 {
            return Err(Error::config("need at least one observation time"));
        }
        if obs_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("observation times must be strictly increasing"));
        }
        Ok(Self { n_units, obs_times })
    }

    /// Observations at `t0 + dt, t0 + 2 dt, ..., t0 + n_times dt`.
    pub fn regular(n_units: usize, n_times: usize, t0: f64, dt: f64) -> Result<Self> {
        let times = (0..=n_times).map(|n| t0 + n as f64 * dt).collect();
        Self::new(n_units, times)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_times(&self) -> usize {
        self.obs_times.len() - 1
    }

    pub fn obs_times(&self) -> &[f64] {
        &self.obs_times
    }

    pub fn t0(&self) -> f64 {
        self.obs_times[0]
    }

    /// Time of observation `n`.
    pub fn obs_time(&self, n: usize) -> f64 {
        self.obs_times[n + 1]
    }

    /// Start of the interval ending at observation `n`.
    pub fn interval_start(&self, n: usize) -> f64 {
        self.obs_times[n]
    }

    /// True when `t` coincides with an entry of the time grid (initial time included).
    pub fn is_grid_time(&self, t: f64) -> bool {
        let tol = 1e-9 * (1.0 + t.abs());
        self.obs_times
            .binary_search_by(|s| {
                if (s - t).abs() <= tol {
                    std::cmp::Ordering::Equal
                } else {
                    s.partial_cmp(&t).unwrap()
                }
            })
            .is_ok()
    }
}

/// Distance between units on a ring of `n_units` sites.
pub fn circle_distance(u: usize, v: usize, n_units: usize) -> usize {
    let (u, v, n) = (u as i64, v as i64, n_units as i64);
    let d = (u - v).abs();
    d.min((u - v + n).abs()).min((u - v - n).abs()) as usize
}
