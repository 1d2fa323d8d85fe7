//! Stochastic (perturbed-observation) ensemble Kalman filter.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{ensemble_means, FilterOutput, StateFn};
use crate::core::{rng_substream, Diagnostics, LoglikResult, Observations, Purpose, SpatPompModel};
use crate::error::{Error, Result};

pub fn enkf_loglik<M: SpatPompModel>(model: &M, obs: &Observations, ensemble: usize, seed: u64) -> Result<LoglikResult> {
    enkf_filter(model, obs, ensemble, seed, &[]).map(|o| o.loglik)
}

/// Forecasts by simulation, then shifts each member by the Kalman gain
/// estimated from the ensemble covariance of `(X, h(X))`, using observations
/// perturbed by the measurement noise. The measurement variance is that of
/// the model at the forecast ensemble mean.
///
/// The log likelihood of `y_n` is Gaussian with the forecast mean and
/// covariance of `h(X) + noise`. A singular predictive covariance gets a
/// ridge of `1e-8` times its mean diagonal, counted as a clamp event.
pub fn enkf_filter<M: SpatPompModel>(
    model: &M,
    obs: &Observations,
    ensemble: usize,
    seed: u64,
    functions: &[StateFn],
) -> Result<FilterOutput> {
    let dims = model.dims();
    obs.check_against(dims)?;
    if ensemble < 2 {
        return Err(Error::config("an ensemble needs at least two members"));
    }
    let (n_units, ud) = (dims.n_units(), model.unit_dim());
    let dim = n_units * ud;
    let theta = model.theta();
    let ne = ensemble as f64;
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut diag = Diagnostics::default();
    let mut xs: Vec<Vec<f64>> = (0..ensemble)
        .into_par_iter()
        .map(|j| model.simulate_initial(&mut rng_substream(seed, 0, 0, Purpose::Init, j as u64)))
        .collect();
    let mut per_time = Vec::with_capacity(obs.n_times());
    let mut means = Vec::with_capacity(obs.n_times());
    for n in 0..obs.n_times() {
        let (t_a, t_b) = (dims.interval_start(n), dims.obs_time(n));
        xs.par_iter_mut().enumerate().for_each(|(j, x)| {
            model.simulate_transition(x, t_a, t_b, &mut rng_substream(seed, 0, n, Purpose::Propose, j as u64));
        });
        let x_mat = DMatrix::from_fn(dim, ensemble, |r, j| xs[j][r]);
        let h_mat = DMatrix::from_fn(n_units, ensemble, |u, j| {
            model.measurement_mean(u, n, model.unit_state(&xs[j], u))
        });
        let x_bar = x_mat.column_mean();
        let h_bar = h_mat.column_mean();
        let xc = &x_mat - &x_bar * DMatrix::from_element(1, ensemble, 1.0);
        let hc = &h_mat - &h_bar * DMatrix::from_element(1, ensemble, 1.0);
        let r_diag: Vec<f64> = (0..n_units)
            .map(|u| model.measurement_var(u, n, &x_bar.as_slice()[u * ud..(u + 1) * ud], &theta).max(0.0))
            .collect();
        let mut s = &hc * hc.transpose() / (ne - 1.0);
        for u in 0..n_units {
            s[(u, u)] += r_diag[u];
        }
        let chol = match s.clone().cholesky() {
            Some(c) => c,
            None => {
                let ridge = match 1e-8 * s.trace() / n_units as f64 {
                    r if r > 0.0 => r,
                    _ => 1e-8,
                };
                diag.clamp_events += 1;
                let ridged = &s + DMatrix::identity(n_units, n_units) * ridge;
                ridged.cholesky().ok_or(Error::SingularInnovation { time: n })?
            }
        };
        let y = DVector::from_column_slice(obs.at_time(n));
        let innov = &y - &h_bar;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        per_time.push(-0.5 * (n_units as f64 * ln_2pi + log_det + innov.dot(&chol.solve(&innov))));

        // K = C_xh S^-1, formed as (S^-1 C_hx)'
        let c_hx = &hc * xc.transpose() / (ne - 1.0);
        let gain = chol.solve(&c_hx).transpose();
        let sd: Vec<f64> = r_diag.iter().map(|v| v.sqrt()).collect();
        xs.par_iter_mut().enumerate().for_each(|(j, x)| {
            let mut rng = rng_substream(seed, 0, n, Purpose::Measure, j as u64);
            let d = DVector::from_fn(n_units, |u, _| y[u] + sd[u] * rng.normal() - h_mat[(u, j)]);
            let shift = &gain * d;
            for (a, b) in x.iter_mut().zip(shift.iter()) {
                *a += b;
            }
            model.project_state(x);
        });
        means.push(ensemble_means(&xs, functions));
    }
    Ok(FilterOutput {
        loglik: LoglikResult::from_per_time(n_units, per_time, diag),
        means,
    })
}
