//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a `ChaCha8Rng` seeded by
//! a `u64`. Sub-streams are derived with [`mix_seed`], so a trial's ground
//! truth, design, noise and auxiliary draws never share a stream.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a list of coordinates into a single seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6a09_e667_f3bc_c909, |acc, &x| {
        splitmix64(acc ^ splitmix64(x))
    })
}

/// Sub-stream identifiers used with [`mix_seed`].
pub mod stream {
    pub const TRUTH: u64 = 1;
    pub const DESIGN: u64 = 2;
    pub const LAMBDA: u64 = 3;
    pub const POWER: u64 = 4;
}

/// `rows x cols` matrix of i.i.d. N(0,1) entries, drawn in row-major order.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_row_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| StandardNormal.sample(rng)),
    )
}

pub fn gaussian_vector(len: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(rng)))
}
