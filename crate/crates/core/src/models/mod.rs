//! Benchmark models.

pub mod bm;
pub mod diffusion;
pub mod lorenz;
pub mod measles;
pub mod sv;

pub use bm::CorrelatedBm;
pub use diffusion::{DiffusionToy, Regime};
pub use lorenz::{Lorenz96, Lorenz96Params};
pub use measles::{Demographics, Measles, MeaslesParams, ReportingParams};
pub use sv::SvToy;
