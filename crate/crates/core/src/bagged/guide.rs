//! The simulated-moment guide shared by ABF-IR and GIRF.

use crate::core::{Diagnostics, SpatPompModel};

/// Sample variance (denominator `K - 1`) of `h_u` over the guide simulations, per unit.
pub(crate) fn guide_variance<M: SpatPompModel>(model: &M, n: usize, guides: &[Vec<f64>]) -> Vec<f64> {
    let k = guides.len() as f64;
    (0..model.dims().n_units())
        .map(|u| {
            let h: Vec<f64> = guides.iter().map(|x| model.measurement_mean(u, n, model.unit_state(x, u))).collect();
            let mean = h.iter().sum::<f64>() / k;
            h.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)
        })
        .collect()
}

/// `log g`: the measurement density of the data at the forecast mean, with the
/// measurement variance inflated by `frac` of the forecast variance.
///
/// `g` is evaluated for the observations at time index `target`, using
/// `horizon` as the forecast time.
#[allow(clippy::too_many_arguments)]
pub(crate) fn log_guide<M: SpatPompModel>(
    model: &M,
    theta: &M::Theta,
    x: &[f64],
    t: f64,
    horizon: f64,
    target: usize,
    y: &[f64],
    var: &[f64],
    frac: f64,
    diag: &mut Diagnostics,
) -> f64 {
    let mu = model.forecast_mean(x, t, horizon);
    let mut total = 0.0;
    for (u, &yu) in y.iter().enumerate() {
        let mu_u = model.unit_state(&mu, u);
        let v_proc = var[u] * frac;
        let lf = if v_proc == 0.0 {
            model.measurement_logdensity(u, target, yu, mu_u, theta)
        } else {
            let v = model.measurement_var(u, target, mu_u, theta) + v_proc;
            let (th, clamped) = model.var_to_theta(u, target, v, mu_u, theta);
            if clamped {
                diag.clamp_events += 1;
            }
            model.measurement_logdensity(u, target, yu, mu_u, &th)
        };
        total += lf;
    }
    total
}

/// `t_{n,s}`, with the endpoints exact.
pub(crate) fn substep_time(t0: f64, t1: f64, s: usize, s_max: usize) -> f64 {
    if s == 0 {
        t0
    } else if s == s_max {
        t1
    } else {
        t0 + (t1 - t0) * s as f64 / s_max as f64
    }
}
