//! Likelihood slices and profiles over one named parameter.

use rayon::prelude::*;

use super::evaluate::FilterSpec;
use super::family::ModelFamily;
use super::iabf::{iabf_maximize, IabfConfig};
use crate::core::{derive_seed, Observations};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub value: f64,
    /// Mean of the replicated log likelihood estimates.
    pub loglik: f64,
    /// Standard error of that mean; zero for a single or deterministic evaluation.
    pub mc_se: f64,
    /// Full parameter vector at which the likelihood was evaluated.
    pub params: Vec<f64>,
    pub replicates: Vec<f64>,
}

impl ProfilePoint {
    fn from_replicates(value: f64, params: Vec<f64>, replicates: Vec<f64>) -> Self {
        let k = replicates.len() as f64;
        let loglik = replicates.iter().sum::<f64>() / k;
        let mc_se = if replicates.len() > 1 {
            let ss: f64 = replicates.iter().map(|v| (v - loglik).powi(2)).sum();
            (ss / (k - 1.0) / k).sqrt()
        } else {
            0.0
        };
        Self {
            value,
            loglik,
            mc_se,
            params,
            replicates,
        }
    }
}

/// Evaluates `filter` `replications` times at each parameter vector.
///
/// Replication `r` uses seed `derive_seed(seed, r)` at every grid point, so
/// neighboring points share random numbers and the result does not depend on
/// the order in which points are visited.
fn evaluate_points<F: ModelFamily>(
    family: &F,
    obs: &Observations,
    points: Vec<(f64, Vec<f64>)>,
    filter: &FilterSpec,
    replications: usize,
    seed: u64,
) -> Vec<Result<ProfilePoint>> {
    let reps = if filter.is_deterministic() { 1 } else { replications.max(1) };
    points
        .into_par_iter()
        .map(|(value, theta)| {
            let lls = (0..reps)
                .map(|r| filter.evaluate(family, &theta, obs, derive_seed(seed, r as u64)).map(|l| l.total()))
                .collect::<Result<Vec<f64>>>()?;
            Ok(ProfilePoint::from_replicates(value, theta, lls))
        })
        .collect()
}

/// Likelihood along `grid` for parameter `name`, others held at the family's base values.
///
/// A failing grid point yields an error entry; the rest of the grid is still evaluated.
pub fn run_slice<F: ModelFamily>(
    family: &F,
    obs: &Observations,
    name: &str,
    grid: &[f64],
    filter: &FilterSpec,
    replications: usize,
    seed: u64,
) -> Result<Vec<Result<ProfilePoint>>> {
    if grid.is_empty() {
        return Err(Error::config("empty slice grid"));
    }
    let q = family.index_of(name)?;
    let points = grid
        .iter()
        .map(|&g| {
            let mut theta = family.base();
            theta[q] = g;
            (g, theta)
        })
        .collect();
    Ok(evaluate_points(family, obs, points, filter, replications, seed))
}

/// Profile likelihood of `name`: at each grid value the parameter is fixed
/// and the others are maximized by IABF, starting from `iabf.start` with the
/// profiled entry overwritten. The likelihood is then evaluated at the
/// center of the final parameter swarm.
#[allow(clippy::too_many_arguments)]
pub fn run_profile<F: ModelFamily>(
    family: &F,
    obs: &Observations,
    name: &str,
    grid: &[f64],
    iabf: &IabfConfig,
    filter: &FilterSpec,
    replications: usize,
    seed: u64,
) -> Result<Vec<Result<ProfilePoint>>> {
    if grid.is_empty() {
        return Err(Error::config("empty profile grid"));
    }
    let q = family.index_of(name)?;
    let mut cfg = iabf.clone();
    if !cfg.fixed.iter().any(|f| f == name) {
        cfg.fixed.push(name.to_string());
    }
    let fits: Vec<Result<(f64, Vec<f64>)>> = grid
        .iter()
        .map(|&g| {
            let mut c = cfg.clone();
            for t in &mut c.start {
                t[q] = g;
            }
            let fit = iabf_maximize(family, obs, &c)?;
            Ok((g, fit.center().to_vec()))
        })
        .collect();
    let mut ok = Vec::new();
    let mut slots = Vec::with_capacity(fits.len());
    for f in fits {
        match f {
            Ok(p) => {
                slots.push(None);
                ok.push(p);
            }
            Err(e) => slots.push(Some(e)),
        }
    }
    let mut evaluated = evaluate_points(family, obs, ok, filter, replications, seed).into_iter();
    Ok(slots
        .into_iter()
        .map(|s| match s {
            Some(e) => Err(e),
            None => evaluated.next().expect("one evaluation per successful fit"),
        })
        .collect())
}
