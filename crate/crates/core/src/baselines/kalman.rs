//! Exact Kalman filter for linear-Gaussian systems, used as the likelihood oracle.

use nalgebra::{DMatrix, DVector};

use crate::core::{Diagnostics, LoglikResult, Observations};
use crate::error::{Error, Result};

/// `X_n = F X_{n-1} + N(0, Q)`, `Y_n = H X_n + N(0, R)`, `X_0 ~ N(x0, P0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianSystem {
    pub f: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

impl LinearGaussianSystem {
    pub fn validate(&self) -> Result<()> {
        let d = self.f.nrows();
        let m = self.h.nrows();
        let ok = self.f.is_square()
            && self.q.shape() == (d, d)
            && self.h.ncols() == d
            && self.r.shape() == (m, m)
            && self.x0.len() == d
            && self.p0.shape() == (d, d);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("inconsistent linear-Gaussian system".into()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct KalmanOutput {
    pub loglik: LoglikResult,
    /// Filter means `E[X_n | Y_{1:n}]`, one per observation time.
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

pub fn kalman_loglik(system: &LinearGaussianSystem, obs: &Observations) -> Result<KalmanOutput> {
    system.validate()?;
    let m = system.h.nrows();
    if obs.n_units() != m {
        return Err(Error::Dimension(format!(
            "{} observed units, system observes {m}",
            obs.n_units()
        )));
    }
    let d = system.f.nrows();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let eye = DMatrix::<f64>::identity(d, d);

    let mut x = system.x0.clone();
    let mut p = system.p0.clone();
    let mut per_time = Vec::with_capacity(obs.n_times());
    let mut means = Vec::with_capacity(obs.n_times());
    let mut covariances = Vec::with_capacity(obs.n_times());

    for n in 0..obs.n_times() {
        let x_pred = &system.f * &x;
        let p_pred = &system.f * &p * system.f.transpose() + &system.q;
        let y = DVector::from_column_slice(obs.at_time(n));
        let innov = y - &system.h * &x_pred;
        let s = &system.h * &p_pred * system.h.transpose() + &system.r;
        let chol = s.clone().cholesky().ok_or(Error::SingularInnovation { time: n })?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let solved = chol.solve(&innov);
        per_time.push(-0.5 * (m as f64 * ln_2pi + log_det + innov.dot(&solved)));

        // K = P H' S^-1, via S^-1 (H P) since S and P are symmetric
        let gain = chol.solve(&(&system.h * &p_pred)).transpose();
        x = &x_pred + &gain * innov;
        // Joseph form keeps P symmetric positive semidefinite.
        let a = &eye - &gain * &system.h;
        p = &a * &p_pred * a.transpose() + &gain * &system.r * gain.transpose();
        means.push(x.clone());
        covariances.push(p.clone());
    }

    Ok(KalmanOutput {
        loglik: LoglikResult::from_per_time(m, per_time, Diagnostics::default()),
        means,
        covariances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(q: f64, r: f64) -> LinearGaussianSystem {
        LinearGaussianSystem {
            f: DMatrix::identity(1, 1),
            q: DMatrix::from_element(1, 1, q),
            h: DMatrix::identity(1, 1),
            r: DMatrix::from_element(1, 1, r),
            x0: DVector::zeros(1),
            p0: DMatrix::zeros(1, 1),
        }
    }

    #[test]
    fn univariate_closed_form() {
        // X1 ~ N(0, 1), Y1 ~ N(0, 2)
        let obs = Observations::new(1, 1, vec![0.0]).unwrap();
        let out = kalman_loglik(&scalar(1.0, 1.0), &obs).unwrap();
        let expected = -0.5 * (4.0 * std::f64::consts::PI).ln();
        assert!((out.loglik.total() - expected).abs() < 1e-12);
        assert!((out.means[0][0]).abs() < 1e-15);
        assert!((out.covariances[0][(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn huge_measurement_noise_ignores_state() {
        let r = 1e8;
        let ys = [0.3, -1.2, 2.0, 0.7];
        let obs = Observations::new(1, 4, ys.to_vec()).unwrap();
        let out = kalman_loglik(&scalar(1.0, r), &obs).unwrap();
        let naive: f64 = ys
            .iter()
            .map(|y| -0.5 * ((2.0 * std::f64::consts::PI * r).ln() + y * y / r))
            .sum();
        assert!((out.loglik.total() - naive).abs() < 1e-3);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let obs = Observations::new(2, 1, vec![0.0, 0.0]).unwrap();
        assert!(matches!(kalman_loglik(&scalar(1.0, 1.0), &obs), Err(Error::Dimension(_))));
    }

    #[test]
    fn singular_innovation_is_reported() {
        let obs = Observations::new(1, 1, vec![0.0]).unwrap();
        assert!(matches!(
            kalman_loglik(&scalar(0.0, 0.0), &obs),
            Err(Error::SingularInnovation { time: 0 })
        ));
    }

    #[test]
    fn invariant_under_orthogonal_rotation() {
        // rotate a 2-d system with full observation: H -> H Q', state -> Q x
        let theta: f64 = 0.7;
        let rot = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let base = LinearGaussianSystem {
            f: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]),
            q: DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]),
            h: DMatrix::identity(2, 2),
            r: DMatrix::from_row_slice(2, 2, &[0.4, 0.0, 0.0, 0.6]),
            x0: DVector::from_vec(vec![0.5, -0.2]),
            p0: DMatrix::from_row_slice(2, 2, &[0.2, 0.05, 0.05, 0.3]),
        };
        let rotated = LinearGaussianSystem {
            f: &rot * &base.f * rot.transpose(),
            q: &rot * &base.q * rot.transpose(),
            h: &base.h * rot.transpose(),
            r: base.r.clone(),
            x0: &rot * &base.x0,
            p0: &rot * &base.p0 * rot.transpose(),
        };
        let obs = Observations::new(2, 3, vec![0.1, 0.2, -0.4, 1.0, 0.8, 0.3]).unwrap();
        let a = kalman_loglik(&base, &obs).unwrap().loglik.total();
        let b = kalman_loglik(&rotated, &obs).unwrap().loglik.total();
        assert!((a - b).abs() < 1e-8);
    }
}
