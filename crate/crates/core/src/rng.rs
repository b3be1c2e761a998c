//! Seed derivation and seeded draws.
//!
//! Every random quantity comes from a ChaCha8 stream keyed by an explicit
//! 64-bit seed. Child seeds are derived by mixing `(parent, stream)` so that
//! adding trials or streams never perturbs existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::Mat;

pub type Rng = ChaCha8Rng;

/// Stream tags for child seeds.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const PROPERTY_INIT: u64 = 2;
    pub const NSM: u64 = 3;
    pub const CONSE: u64 = 4;
    pub const DUMMY: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(parent, index)`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index))
}

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows x cols` matrix of N(0, std^2) draws, filled in row-major order.
pub fn gaussian_mat(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let z: f64 = StandardNormal.sample(rng);
            m[(i, j)] = std * z;
        }
    }
    m
}
