use ndarray::{Array1, Array2, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use super::moments::average_outer;
use super::{validate_priors, validate_unit_columns};
use crate::error::{check_len, Error, Result};
use crate::rng;
use crate::tensor::{DenseTensor3, FactoredTensor3, DENSE_DIM_LIMIT};

/// Mixture of spherical Gaussians `N(a_j, σ² I)` with known `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGmm {
    means: Array2<f64>,
    priors: Array1<f64>,
    sigma: f64,
}

impl SphericalGmm {
    pub fn new(means: Array2<f64>, priors: Array1<f64>, sigma: f64) -> Result<Self> {
        validate_unit_columns(&means)?;
        check_len(priors.len(), means.ncols())?;
        validate_priors(&priors)?;
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma {sigma} must be finite and nonnegative")));
        }
        Ok(Self { means, priors, sigma })
    }

    pub fn dim(&self) -> usize {
        self.means.nrows()
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn priors(&self) -> &Array1<f64> {
        &self.priors
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `Σ λ_j a_j^{⊗3}`, the target of the corrected moment.
    pub fn target_tensor(&self) -> Result<FactoredTensor3> {
        FactoredTensor3::new(self.means.clone(), self.priors.clone())
    }

    /// `d × n` samples and their labels.
    pub fn sample(&self, n: usize, seed: u64) -> Result<(Array2<f64>, Vec<usize>)> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        let states = WeightedIndex::new(self.priors.iter().copied())
            .map_err(|e| Error::InvalidArgument(format!("priors: {e}")))?;
        let d = self.dim();
        let mut rng = rng::seeded(seed);
        let mut z = Array2::zeros((d, n));
        let mut labels = Vec::with_capacity(n);
        for tau in 0..n {
            let h = states.sample(&mut rng);
            labels.push(h);
            for i in 0..d {
                let g: f64 = rng.sample(StandardNormal);
                z[[i, tau]] = self.means[[i, h]] + self.sigma * g;
            }
        }
        Ok((z, labels))
    }
}

/// Subtracts `σ² Σ_i (m⊗e_i⊗e_i + e_i⊗m⊗e_i + e_i⊗e_i⊗m)` in place.
fn subtract_correction(entries: &mut [f64], d: usize, sigma2: f64, m: &Array1<f64>) {
    for i in 0..d {
        for j in 0..d {
            // m ⊗ e_j ⊗ e_j
            entries[(i * d + j) * d + j] -= sigma2 * m[i];
            // e_j ⊗ m ⊗ e_j
            entries[(j * d + i) * d + j] -= sigma2 * m[i];
            // e_j ⊗ e_j ⊗ m
            entries[(j * d + j) * d + i] -= sigma2 * m[i];
        }
    }
}

/// Plug-in estimate of the corrected moment
/// `M₃ = E[z⊗z⊗z] − σ² Σ_i (E[z]⊗e_i⊗e_i + e_i⊗E[z]⊗e_i + e_i⊗e_i⊗E[z])`
/// from the columns of `samples`.
pub fn gmm_modified_moment(gmm: &SphericalGmm, samples: ArrayView2<f64>) -> Result<DenseTensor3> {
    let (d, n) = samples.dim();
    check_len(gmm.dim(), d)?;
    if n == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut entries = average_outer(samples, samples, samples)?;
    let mean = samples.sum_axis(ndarray::Axis(1)) / n as f64;
    subtract_correction(&mut entries, d, gmm.sigma * gmm.sigma, &mean);
    DenseTensor3::from_entries(d, entries, true)
}

/// Raw third moment `E[z⊗z⊗z]` of the mixture, from the Gaussian
/// moments `E[(a+g)_i (a+g)_j (a+g)_l] = a_i a_j a_l + σ²(a_i δ_jl + a_j δ_il + a_l δ_ij)`.
pub fn gmm_raw_moment(gmm: &SphericalGmm) -> Result<DenseTensor3> {
    let d = gmm.dim();
    if d > DENSE_DIM_LIMIT {
        return Err(Error::Resource(format!("d = {d} exceeds dense limit {DENSE_DIM_LIMIT}")));
    }
    let sigma2 = gmm.sigma * gmm.sigma;
    let delta = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
    let mut entries = vec![0.0; d * d * d];
    for (c, &lam) in gmm.priors.iter().enumerate() {
        let a = gmm.means.column(c);
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    let m =
                        a[i] * a[j] * a[l] + sigma2 * (a[i] * delta(j, l) + a[j] * delta(i, l) + a[l] * delta(i, j));
                    entries[(i * d + j) * d + l] += lam * m;
                }
            }
        }
    }
    DenseTensor3::from_entries(d, entries, true)
}

/// Population value of the corrected moment: [`gmm_raw_moment`] minus the
/// correction at the true mixture mean.
pub fn gmm_population_moment(gmm: &SphericalGmm) -> Result<DenseTensor3> {
    let d = gmm.dim();
    let mut entries = gmm_raw_moment(gmm)?.into_entries();
    let mean = gmm.means.dot(&gmm.priors);
    subtract_correction(&mut entries, d, gmm.sigma * gmm.sigma, &mean);
    DenseTensor3::from_entries(d, entries, true)
}
