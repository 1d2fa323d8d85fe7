//! Parameterized model families: how a flat parameter vector becomes a model.

use serde::{Deserialize, Serialize};

use crate::baselines::kalman::LinearGaussianSystem;
use crate::core::{SpatPompDims, SpatPompModel};
use crate::error::{Error, Result};
use crate::models::{CorrelatedBm, Demographics, Lorenz96, Lorenz96Params, Measles, MeaslesParams};

/// Bijection from a parameter's natural range onto the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    /// Positive parameters.
    Log,
    /// Parameters in `(0, 1)`.
    Logit,
    Identity,
}

impl Transform {
    pub fn to_real(self, v: f64) -> f64 {
        match self {
            Transform::Log => v.ln(),
            Transform::Logit => (v / (1.0 - v)).ln(),
            Transform::Identity => v,
        }
    }

    pub fn from_real(self, z: f64) -> f64 {
        match self {
            Transform::Log => z.exp(),
            Transform::Logit => 1.0 / (1.0 + (-z).exp()),
            Transform::Identity => z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub transform: Transform,
}

const fn spec(name: &'static str, transform: Transform) -> ParamSpec {
    ParamSpec { name, transform }
}

pub trait ModelFamily: Sync {
    type Model: SpatPompModel + Send;

    fn params(&self) -> &[ParamSpec];

    /// The parameter vector used for anything not set explicitly.
    fn base(&self) -> Vec<f64>;

    fn build(&self, theta: &[f64]) -> Result<Self::Model>;

    fn dims(&self) -> &SpatPompDims;

    /// The exact linear-Gaussian form of the model, when it has one.
    fn linear_gaussian(&self, _theta: &[f64]) -> Option<LinearGaussianSystem> {
        None
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.params()
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::config(format!("unknown parameter {name}")))
    }

    /// [`Self::base`] with named entries replaced.
    fn with_values(&self, values: &[(&str, f64)]) -> Result<Vec<f64>> {
        let mut theta = self.base();
        for &(name, v) in values {
            theta[self.index_of(name)?] = v;
        }
        Ok(theta)
    }
}

#[derive(Debug, Clone)]
pub struct BmFamily {
    dims: SpatPompDims,
    rho: f64,
    tau: f64,
}

const BM_PARAMS: [ParamSpec; 2] = [spec("rho", Transform::Logit), spec("tau", Transform::Log)];

impl BmFamily {
    pub fn new(dims: SpatPompDims, rho: f64, tau: f64) -> Self {
        Self { dims, rho, tau }
    }
}

impl ModelFamily for BmFamily {
    type Model = CorrelatedBm;

    fn params(&self) -> &[ParamSpec] {
        &BM_PARAMS
    }

    fn base(&self) -> Vec<f64> {
        vec![self.rho, self.tau]
    }

    fn build(&self, theta: &[f64]) -> Result<CorrelatedBm> {
        CorrelatedBm::with_dims(self.dims.clone(), theta[0], theta[1])
    }

    fn dims(&self) -> &SpatPompDims {
        &self.dims
    }

    fn linear_gaussian(&self, theta: &[f64]) -> Option<LinearGaussianSystem> {
        self.build(theta).ok().map(|m| m.kalman_system())
    }
}

#[derive(Debug, Clone)]
pub struct LorenzFamily {
    dims: SpatPompDims,
    base: Lorenz96Params,
}

const LORENZ_PARAMS: [ParamSpec; 3] = [
    spec("forcing", Transform::Identity),
    spec("sigma_p", Transform::Log),
    spec("tau", Transform::Log),
];

impl LorenzFamily {
    pub fn new(dims: SpatPompDims, base: Lorenz96Params) -> Self {
        Self { dims, base }
    }
}

impl ModelFamily for LorenzFamily {
    type Model = Lorenz96;

    fn params(&self) -> &[ParamSpec] {
        &LORENZ_PARAMS
    }

    fn base(&self) -> Vec<f64> {
        vec![self.base.forcing, self.base.sigma_p, self.base.tau]
    }

    fn build(&self, theta: &[f64]) -> Result<Lorenz96> {
        let p = Lorenz96Params {
            forcing: theta[0],
            sigma_p: theta[1],
            tau: theta[2],
            ..self.base.clone()
        };
        Lorenz96::with_dims(self.dims.clone(), p)
    }

    fn dims(&self) -> &SpatPompDims {
        &self.dims
    }
}

#[derive(Debug, Clone)]
pub struct MeaslesFamily {
    dims: SpatPompDims,
    base: MeaslesParams,
    demographics: Demographics,
}

const MEASLES_PARAMS: [ParamSpec; 13] = [
    spec("mean_beta", Transform::Log),
    spec("amplitude", Transform::Logit),
    spec("alpha", Transform::Log),
    spec("iota", Transform::Identity),
    spec("sigma_se", Transform::Log),
    spec("mu_ei", Transform::Log),
    spec("mu_ir", Transform::Log),
    spec("rho", Transform::Logit),
    spec("psi", Transform::Log),
    spec("gravity", Transform::Log),
    spec("s0", Transform::Logit),
    spec("e0", Transform::Logit),
    spec("i0", Transform::Logit),
];

impl MeaslesFamily {
    pub fn new(dims: SpatPompDims, base: MeaslesParams, demographics: Demographics) -> Self {
        Self {
            dims,
            base,
            demographics,
        }
    }
}

impl ModelFamily for MeaslesFamily {
    type Model = Measles;

    fn params(&self) -> &[ParamSpec] {
        &MEASLES_PARAMS
    }

    fn base(&self) -> Vec<f64> {
        let b = &self.base;
        vec![
            b.mean_beta, b.amplitude, b.alpha, b.iota, b.sigma_se, b.mu_ei, b.mu_ir, b.rho, b.psi, b.gravity, b.s0,
            b.e0, b.i0,
        ]
    }

    fn build(&self, t: &[f64]) -> Result<Measles> {
        let p = MeaslesParams {
            mean_beta: t[0],
            amplitude: t[1],
            alpha: t[2],
            iota: t[3],
            sigma_se: t[4],
            mu_ei: t[5],
            mu_ir: t[6],
            rho: t[7],
            psi: t[8],
            gravity: t[9],
            s0: t[10],
            e0: t[11],
            i0: t[12],
            ..self.base.clone()
        };
        Measles::with_dims(self.dims.clone(), p, self.demographics.clone())
    }

    fn dims(&self) -> &SpatPompDims {
        &self.dims
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms_round_trip() {
        for (t, v) in [(Transform::Log, 3.2), (Transform::Logit, 0.4), (Transform::Identity, -1.5)] {
            assert!((t.from_real(t.to_real(v)) - v).abs() < 1e-14);
        }
    }

    #[test]
    fn measles_base_round_trips_through_build() {
        let demo = Demographics::synthetic(3, 1);
        let dims = SpatPompDims::regular(3, 4, 0.0, 1.0 / 26.0).unwrap();
        let fam = MeaslesFamily::new(dims, MeaslesParams::default(), demo);
        let m = fam.build(&fam.base()).unwrap();
        assert_eq!(m.params(), &MeaslesParams::default());
        assert_eq!(fam.index_of("gravity").unwrap(), 9);
    }
}
