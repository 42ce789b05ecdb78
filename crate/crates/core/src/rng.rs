//! Seeded random streams.
//!
//! Every randomized routine takes a `u64` seed and draws from a ChaCha8
//! stream. Parallel trials use the trial index as the ChaCha stream id, so
//! trial `i` sees the same numbers whichever worker runs it.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type TrialRng = ChaCha8Rng;

/// Generator for stream 0 of `seed`.
pub fn seeded(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for an independent stream of `seed`.
pub fn stream(seed: u64, stream: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed (SplitMix64 finalizer) for nested seeding.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, std: f64) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| std * rng.sample::<f64, _>(StandardNormal))
}

/// `rows × cols` matrix of i.i.d. N(0, std²) entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for mut col in m.columns_mut() {
        for v in col.iter_mut() {
            *v = std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    m
}

/// Uniform draw from the unit sphere in `R^d`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Array1<f64> {
    loop {
        let v = gaussian_vec(rng, d, 1.0);
        let n = v.dot(&v).sqrt();
        if n > 1e-300 {
            return v / n;
        }
    }
}
