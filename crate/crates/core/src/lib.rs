//! Bagged filters for spatiotemporal partially observed Markov process models.
//!
//! The crate is organised in five layers:
//!
//! - [`core`]: the model contract, neighborhoods, log-domain weight arithmetic,
//!   resampling and keyed random number streams.
//! - [`models`]: correlated Brownian motion, measles SEIR metapopulation,
//!   stochastic Lorenz-96, a stochastic-volatility toy and an Euler diffusion toy.
//! - [`bagged`]: the unadapted, adapted and intermediate-resampling bagged filters.
//! - [`baselines`]: Kalman, particle, block particle, ensemble Kalman and guided
//!   intermediate resampling filters.
//! - [`inference`]: iterated bagged filtering, slices, profiles and MCAP-style intervals.
//!
//! Unit and time indices are zero-based throughout: unit `u` is in `0..U` and
//! observation `n` is in `0..N`, observed at `obs_times[n + 1]`.

pub mod bagged;
pub mod baselines;
pub mod core;
pub mod error;
pub mod inference;
pub mod models;

pub use crate::core::{
    circle_distance, conditional_loglik, log_sum_exp, Dataset, Diagnostics, LoglikResult,
    Neighborhood, Observations, Purpose, ResampleScheme, RngStream, SpatPompDims,
    SpatPompModel, StreamKey,
};
pub use crate::error::{Error, Result};
