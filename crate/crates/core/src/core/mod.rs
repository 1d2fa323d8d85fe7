//! Model contract, index sets, neighborhoods, weights, resampling and RNG streams.

mod dims;
mod model;
pub mod neighborhood;
pub mod resample;
pub mod rng;
mod weights;

pub use dims::{circle_distance, SpatPompDims};
pub use model::{simulate_dataset, Dataset, Observations, SpatPompModel};
pub use neighborhood::{LagGroup, Neighborhood, ResolvedNeighborhoods};
pub use resample::{resample_indices, sample_index, ResampleScheme};
pub use rng::{derive_seed, rng_substream, Purpose, RngStream, StreamKey};
pub use weights::{
    conditional_loglik, effective_sample_size, log_mean_exp, log_sum_exp, Diagnostics,
    LogWeightTensor, LoglikResult, DEFAULT_LOGLIK_FLOOR,
};
