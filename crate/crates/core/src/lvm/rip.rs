use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::rng;

pub const WEAK_RIP_BOUND: f64 = 2.0;

/// Monte Carlo surrogate for the weak RIP condition: restricted spectral
/// norms over random column subsets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakRipReport {
    pub subset_size: usize,
    pub trials: usize,
    pub max_norm: f64,
    pub mean_norm: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Trial `i` draws its subset from stream `i` of `seed`.
pub fn check_weak_rip(noise: ArrayView2<f64>, subset_size: usize, trials: usize, seed: u64) -> Result<WeakRipReport> {
    let n = noise.ncols();
    if subset_size == 0 || subset_size > n {
        return Err(Error::InvalidArgument(format!("subset size {subset_size} not in 1..={n}")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let norms: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64);
            let cols = sample(&mut r, n, subset_size).into_vec();
            let sub: Array2<f64> = noise.select(Axis(1), &cols);
            spectral_norm(sub.view())
        })
        .collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let mean_norm = norms.iter().sum::<f64>() / trials as f64;
    Ok(WeakRipReport {
        subset_size,
        trials,
        max_norm,
        mean_norm,
        bound: WEAK_RIP_BOUND,
        passed: max_norm <= WEAK_RIP_BOUND,
    })
}
