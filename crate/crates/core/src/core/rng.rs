//! Keyed, counter-based random number streams.
//!
//! Every random draw in the crate comes from a stream identified by a
//! [`StreamKey`]. The key is written directly into the 256-bit ChaCha key, so
//! distinct keys give unrelated keystreams and the draws for a key never depend
//! on which thread evaluates it or in what order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a stream is used for. Part of the key so that proposal, resampling,
/// guide and measurement draws for the same replicate and time never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u32)]
pub enum Purpose {
    Init = 1,
    Propose = 2,
    Resample = 3,
    Guide = 4,
    Measure = 5,
    Intermediate = 6,
    Perturb = 7,
    Dataset = 8,
    Setup = 9,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub replicate: u64,
    pub time_index: u32,
    pub purpose: Purpose,
    pub substream: u64,
}

impl StreamKey {
    pub fn new(replicate: u64, time_index: usize, purpose: Purpose, substream: u64) -> Self {
        Self {
            replicate,
            time_index: time_index as u32,
            purpose,
            substream,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    key: StreamKey,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, key: StreamKey) -> Self {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&key.replicate.to_le_bytes());
        seed[16..20].copy_from_slice(&key.time_index.to_le_bytes());
        seed[20..24].copy_from_slice(&(key.purpose as u32).to_le_bytes());
        seed[24..32].copy_from_slice(&key.substream.to_le_bytes());
        Self {
            master_seed,
            key,
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Shorthand for [`RngStream::new`] with a freshly built key.
pub fn rng_substream(
    master_seed: u64,
    replicate: u64,
    time_index: usize,
    purpose: Purpose,
    substream: u64,
) -> RngStream {
    RngStream::new(
        master_seed,
        StreamKey::new(replicate, time_index, purpose, substream),
    )
}

/// Derives a child seed from a master seed and an index (splitmix64 finalizer).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
