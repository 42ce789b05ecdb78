//! Spectral-norm estimation by multi-restart power iteration.
//!
//! The estimate is `max |T(x,x,x)|` over every iterate of every restart. It
//! is a lower bound on the true spectral norm of a symmetric tensor, and it
//! never decreases as restarts are added: restart `r` always draws its
//! start from stream `r` of the seed.

use ndarray::Array1;

use super::{DenseTensor3, Tensor3};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::rng;

#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub value: f64,
    /// Unit vector attaining `value`.
    pub argmax: Array1<f64>,
}

pub fn spectral_norm_estimate<T: Tensor3 + ?Sized>(
    tensor: &T,
    restarts: usize,
    iters: usize,
    seed: u64,
) -> Result<SpectralEstimate> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let d = tensor.dim();
    let mut best = SpectralEstimate { value: 0.0, argmax: Array1::zeros(d) };
    for r in 0..restarts {
        let mut rng = rng::stream(seed, r as u64);
        let mut x = rng::unit_vector(&mut rng, d);
        let consider = |x: &Array1<f64>, best: &mut SpectralEstimate| -> Result<()> {
            let v = tensor.cubic_form(x.view())?.abs();
            if v > best.value {
                best.value = v;
                best.argmax = x.clone();
            }
            Ok(())
        };
        consider(&x, &mut best)?;
        for _ in 0..iters {
            let u = tensor.contract_1(x.view(), x.view())?;
            let n = norm(u.view());
            if !(n > 1e-300) {
                break;
            }
            x = u / n;
            consider(&x, &mut best)?;
        }
    }
    Ok(best)
}

/// Rescales `noise` so its spectral-norm estimate (same restarts, iters and
/// seed) equals `target`.
pub fn scale_noise_to(
    noise: &DenseTensor3,
    target: f64,
    restarts: usize,
    iters: usize,
    seed: u64,
) -> Result<DenseTensor3> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::InvalidArgument(format!("target norm {target} must be finite and nonnegative")));
    }
    let current = spectral_norm_estimate(noise, restarts, iters, seed)?.value;
    if current == 0.0 {
        return Err(Error::InvalidArgument("cannot rescale a zero tensor".into()));
    }
    Ok(noise.scaled(target / current))
}
