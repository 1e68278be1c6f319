use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Matrix;

/// The generator behind every seeded draw in this crate. Recorded in model
/// files so a model can be regenerated bit-for-bit.
pub type SomdRng = ChaCha8Rng;

/// Human-readable name of the PRNG and the normal transform.
pub const PRNG_NAME: &str = "ChaCha8Rng(seed_from_u64)+StandardNormal(ziggurat)";

pub fn seeded_rng(seed: u64) -> SomdRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives the seed of an independent sub-stream (trial, location, ...)
/// from a master seed. SplitMix64 finalizer over the pair.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `rows × cols` matrix of i.i.d. standard normal entries, filled row-major.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}
