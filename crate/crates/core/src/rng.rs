//! Seeded random streams.
//!
//! Every stochastic component draws from a `ChaCha8Rng` whose seed is derived
//! from a master seed and a list of integer coordinates (point id, packet id,
//! view index, ...). Derivation is a SplitMix64 fold, so streams are
//! independent of evaluation order and identical across platforms.
//! Standard normal draws use `rand_distr::StandardNormal` (ziggurat).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a sub-seed from `master` and a path of coordinates.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Stream tags, so distinct consumers never share a derived seed.
pub mod tag {
    pub const ANTENNA_OFFSET: u64 = 1;
    pub const STATIC_MULTIPATH: u64 = 2;
    pub const PACKET: u64 = 3;
    pub const INIT: u64 = 10;
    pub const SHUFFLE: u64 = 11;
    pub const NOISE: u64 = 12;
    pub const STAGE1: u64 = 20;
    pub const STAGE2: u64 = 21;
    pub const VDL: u64 = 22;
    pub const DNN: u64 = 23;
    pub const PREDICT: u64 = 24;
}
