//! Third-order tensors and their multilinear contractions.
//!
//! Two concrete representations exist. [`FactoredTensor3`] holds the CP form
//! `Σ λ_j a_j ⊗ b_j ⊗ c_j` and contracts in `O(dk)`. [`DenseTensor3`] stores
//! all `d³` entries and serves as an oracle and as a carrier for arbitrary
//! perturbations. Everything downstream only needs contractions, so every
//! representation implements [`Tensor3`].

mod container;
mod dense;
mod factored;
mod perturbed;
mod spectral;

pub use container::{read_sidecar, read_tensor, write_tensor, Sidecar, TensorFile, TensorKind};
pub use dense::{DenseTensor3, DENSE_DIM_LIMIT};
pub use factored::{random_components, ComponentDistribution, FactoredTensor3};
pub use perturbed::PerturbedTensor;
pub use spectral::{scale_noise_to, spectral_norm_estimate, SpectralEstimate};

use ndarray::{Array1, ArrayView1};

use crate::error::{check_len, Result};

/// Which mode is left open by a two-vector contraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    First,
    Second,
    Third,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::First, Mode::Second, Mode::Third];

    pub fn index(self) -> usize {
        match self {
            Mode::First => 0,
            Mode::Second => 1,
            Mode::Third => 2,
        }
    }
}

/// A third-order tensor viewed as a multilinear form.
pub trait Tensor3: Send + Sync {
    fn dim(&self) -> usize;

    /// Contracts the two modes other than `free` with `p` and `q` (in mode
    /// order). `Mode::First` gives `T(I, p, q)`, `Mode::Second` gives
    /// `T(p, I, q)` and `Mode::Third` gives `T(p, q, I)`.
    fn contract_mode(&self, free: Mode, p: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<Array1<f64>>;

    /// `T(I, v, w)`.
    fn contract_1(&self, v: ArrayView1<f64>, w: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.contract_mode(Mode::First, v, w)
    }

    /// `T(u, v, w) = ⟨u, T(I, v, w)⟩`.
    fn contract_scalar(&self, u: ArrayView1<f64>, v: ArrayView1<f64>, w: ArrayView1<f64>) -> Result<f64> {
        check_len(self.dim(), u.len())?;
        Ok(u.dot(&self.contract_1(v, w)?))
    }

    /// The cubic form `T(x, x, x)`.
    fn cubic_form(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.contract_scalar(x, x, x)
    }
}

impl<T: Tensor3 + ?Sized> Tensor3 for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn contract_mode(&self, free: Mode, p: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<Array1<f64>> {
        (**self).contract_mode(free, p, q)
    }
}
