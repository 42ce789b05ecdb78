use ndarray::{Array1, ArrayView1};

use super::{spectral_norm_estimate, DenseTensor3, FactoredTensor3, Mode, Tensor3};
use crate::error::{check_len, Error, Result};

/// `T̂ = T + E`: a factored signal plus a dense perturbation with a cached
/// spectral-norm estimate of `E`.
#[derive(Debug, Clone)]
pub struct PerturbedTensor {
    signal: FactoredTensor3,
    noise: DenseTensor3,
    noise_spectral_norm: f64,
}

impl PerturbedTensor {
    /// Estimates `‖E‖` with `restarts` power-iteration restarts.
    pub fn new(signal: FactoredTensor3, noise: DenseTensor3, restarts: usize, iters: usize, seed: u64) -> Result<Self> {
        check_len(signal.dim(), noise.dim())?;
        let est = spectral_norm_estimate(&noise, restarts, iters, seed)?;
        Ok(Self { signal, noise, noise_spectral_norm: est.value })
    }

    /// Uses a known norm (e.g. from [`super::scale_noise_to`]) instead of
    /// re-estimating.
    pub fn with_known_norm(signal: FactoredTensor3, noise: DenseTensor3, noise_spectral_norm: f64) -> Result<Self> {
        check_len(signal.dim(), noise.dim())?;
        if !(noise_spectral_norm >= 0.0) {
            return Err(Error::InvalidArgument("noise norm must be nonnegative".into()));
        }
        Ok(Self { signal, noise, noise_spectral_norm })
    }

    pub fn signal(&self) -> &FactoredTensor3 {
        &self.signal
    }

    pub fn noise(&self) -> &DenseTensor3 {
        &self.noise
    }

    pub fn noise_spectral_norm(&self) -> f64 {
        self.noise_spectral_norm
    }
}

impl Tensor3 for PerturbedTensor {
    fn dim(&self) -> usize {
        self.signal.dim()
    }

    fn contract_mode(&self, free: Mode, p: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<Array1<f64>> {
        let s = self.signal.contract_mode(free, p, q)?;
        let e = self.noise.contract_mode(free, p, q)?;
        Ok(s + e)
    }
}
