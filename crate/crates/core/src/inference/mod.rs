//! Parameter inference: iterated adapted bagged filtering, likelihood slices
//! and profiles, and MCAP-style confidence intervals.

pub mod evaluate;
pub mod family;
pub mod iabf;
pub mod mcap;
pub mod slice;

pub use evaluate::FilterSpec;
pub use family::{BmFamily, LorenzFamily, MeaslesFamily, ModelFamily, ParamSpec, Transform};
pub use iabf::{iabf_maximize, IabfConfig, IabfResult, IterationSummary};
pub use mcap::{mcap_interval, McapInterval};
pub use slice::{run_profile, run_slice, ProfilePoint};
