use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{DenseTensor3, Mode, Tensor3, DENSE_DIM_LIMIT};
use crate::error::{check_len, Error, Result};
use crate::linalg::column_norms;
use crate::rng;

const UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
enum Factors {
    Symmetric(Array2<f64>),
    PerMode(Box<[Array2<f64>; 3]>),
}

/// Rank-`k` CP tensor `Σ_j λ_j a_j ⊗ b_j ⊗ c_j` with unit-norm components.
///
/// The symmetric case stores one `d × k` matrix used for all three modes.
/// The per-mode case stores `A`, `B`, `C` separately and is what the
/// alternating asymmetric iteration runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredTensor3 {
    weights: Array1<f64>,
    factors: Factors,
}

fn validate_factor(m: &Array2<f64>, k: usize) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidArgument("rank and dimension must be at least 1".into()));
    }
    check_len(k, m.ncols())?;
    for (j, n) in column_norms(m).iter().enumerate() {
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidArgument(format!("component {j} has norm {n}, expected 1")));
        }
    }
    Ok(())
}

fn validate_weights(w: &Array1<f64>) -> Result<()> {
    if w.iter().any(|x| !x.is_finite() || *x == 0.0) {
        return Err(Error::InvalidArgument("weights must be finite and nonzero".into()));
    }
    Ok(())
}

impl FactoredTensor3 {
    /// Symmetric tensor `Σ_j λ_j a_j^{⊗3}`; columns of `components` must be unit norm.
    pub fn new(components: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        validate_factor(&components, weights.len())?;
        validate_weights(&weights)?;
        Ok(Self { weights, factors: Factors::Symmetric(components) })
    }

    /// Symmetric tensor with unit weights.
    pub fn unit_weights(components: Array2<f64>) -> Result<Self> {
        let k = components.ncols();
        Self::new(components, Array1::ones(k))
    }

    /// Builds the same tensor from non-normalized columns by absorbing
    /// `‖a_j‖³` into the weights.
    pub fn from_unnormalized(raw: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        check_len(raw.ncols(), weights.len())?;
        let norms = column_norms(&raw);
        if norms.iter().any(|n| *n == 0.0) {
            return Err(Error::InvalidArgument("zero component".into()));
        }
        let mut a = raw;
        for (mut col, n) in a.columns_mut().into_iter().zip(norms.iter()) {
            col /= *n;
        }
        let w = &weights * &norms.mapv(|n| n * n * n);
        Self::new(a, w)
    }

    /// Per-mode tensor `Σ_j λ_j a_j ⊗ b_j ⊗ c_j`.
    pub fn new_asymmetric(factors: [Array2<f64>; 3], weights: Array1<f64>) -> Result<Self> {
        let d = factors[0].nrows();
        for f in &factors {
            check_len(d, f.nrows())?;
            validate_factor(f, weights.len())?;
        }
        validate_weights(&weights)?;
        Ok(Self { weights, factors: Factors::PerMode(Box::new(factors)) })
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self.factors, Factors::Symmetric(_))
    }

    /// The first-mode factor `A` (the only factor of a symmetric tensor).
    pub fn components(&self) -> &Array2<f64> {
        self.mode_components(Mode::First)
    }

    pub fn mode_components(&self, mode: Mode) -> &Array2<f64> {
        match &self.factors {
            Factors::Symmetric(a) => a,
            Factors::PerMode(f) => &f[mode.index()],
        }
    }

    pub fn component(&self, j: usize) -> ArrayView1<'_, f64> {
        self.components().column(j)
    }

    /// `max |λ| / min |λ|`.
    pub fn weight_ratio(&self) -> f64 {
        let (lo, hi) =
            self.weights.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), w| (lo.min(w.abs()), hi.max(w.abs())));
        hi / lo
    }

    /// Same components with new weights.
    pub fn with_weights(&self, weights: Array1<f64>) -> Result<Self> {
        check_len(self.rank(), weights.len())?;
        validate_weights(&weights)?;
        Ok(Self { weights, factors: self.factors.clone() })
    }

    /// Explicit `d³` array. Guarded by [`DENSE_DIM_LIMIT`].
    pub fn densify(&self) -> Result<DenseTensor3> {
        let d = self.dim();
        if d > DENSE_DIM_LIMIT {
            return Err(Error::Resource(format!("densify: d = {d} exceeds dense limit {DENSE_DIM_LIMIT}")));
        }
        let mut out = DenseTensor3::zeros(d);
        let (a, b, c) =
            (self.mode_components(Mode::First), self.mode_components(Mode::Second), self.mode_components(Mode::Third));
        for j in 0..self.rank() {
            out.add_outer(self.weights[j], a.column(j), b.column(j), c.column(j));
        }
        Ok(out.with_symmetric_flag(self.is_symmetric()))
    }
}

/// `F · (λ ∘ Gᵀp ∘ Hᵀq)`.
fn contract_factored(
    weights: &Array1<f64>,
    free: ArrayView2<f64>,
    g: ArrayView2<f64>,
    h: ArrayView2<f64>,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
) -> Array1<f64> {
    let gp = g.t().dot(&p);
    let hq = h.t().dot(&q);
    let coeff = Array1::from_shape_fn(weights.len(), |j| weights[j] * (gp[j] * hq[j]));
    free.dot(&coeff)
}

impl Tensor3 for FactoredTensor3 {
    fn dim(&self) -> usize {
        self.components().nrows()
    }

    fn contract_mode(&self, free: Mode, p: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len(self.dim(), p.len())?;
        check_len(self.dim(), q.len())?;
        let a = self.mode_components(Mode::First).view();
        let b = self.mode_components(Mode::Second).view();
        let c = self.mode_components(Mode::Third).view();
        Ok(match free {
            Mode::First => contract_factored(&self.weights, a, b, c, p, q),
            Mode::Second => contract_factored(&self.weights, b, a, c, p, q),
            Mode::Third => contract_factored(&self.weights, c, a, b, p, q),
        })
    }
}

/// How [`random_components`] draws columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentDistribution {
    /// Uniform on the unit sphere (exactly unit columns).
    UnitSphere,
    /// Raw `N(0, I/d)` draws; norms concentrate near 1.
    Gaussian,
}

/// `d × k` matrix of random components, deterministic in `seed`.
pub fn random_components(d: usize, k: usize, seed: u64, distribution: ComponentDistribution) -> Result<Array2<f64>> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidArgument("d and k must be at least 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut m = rng::gaussian_matrix(&mut rng, d, k, 1.0 / (d as f64).sqrt());
    if distribution == ComponentDistribution::UnitSphere {
        for mut col in m.columns_mut() {
            let n = col.dot(&col).sqrt();
            col /= n;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn e(d: usize, i: usize) -> Array1<f64> {
        let mut v = Array1::zeros(d);
        v[i] = 1.0;
        v
    }

    #[test]
    fn rank_one_identity() {
        let mut a = Array2::zeros((3, 1));
        a[[0, 0]] = 1.0;
        let t = FactoredTensor3::unit_weights(a).unwrap();
        let out = t.contract_1(e(3, 0).view(), e(3, 0).view()).unwrap();
        assert_eq!(out, e(3, 0));
        assert_eq!(t.cubic_form(e(3, 0).view()).unwrap(), 1.0);
    }

    #[test]
    fn orthonormal_cross_terms_vanish() {
        let t = FactoredTensor3::new(Array2::eye(4), array![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = t.contract_1(e(4, 1).view(), e(4, 1).view()).unwrap();
        assert_eq!(out, &e(4, 1) * 2.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = array![[1.0, 0.5], [0.0, 0.5]];
        assert!(FactoredTensor3::unit_weights(a).is_err());
        assert!(FactoredTensor3::new(Array2::eye(2), array![1.0, 0.0]).is_err());
        assert!(FactoredTensor3::new(Array2::eye(2), array![1.0]).is_err());
        let t = FactoredTensor3::unit_weights(Array2::eye(3)).unwrap();
        assert!(matches!(t.contract_1(e(2, 0).view(), e(3, 0).view()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cancelling_weights_densify_to_zero() {
        let a = array![[1.0, 1.0], [0.0, 0.0]];
        let t = FactoredTensor3::new(a, array![1.0, -1.0]).unwrap();
        let dense = t.densify().unwrap();
        assert!(dense.entries().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn densify_rank_one_basis() {
        let t = FactoredTensor3::unit_weights(array![[1.0], [0.0]]).unwrap();
        let dense = t.densify().unwrap();
        assert_eq!(dense.get(0, 0, 0), 1.0);
        assert_eq!(dense.entries().iter().filter(|x| **x != 0.0).count(), 1);
        assert!(dense.is_symmetric());
    }

    #[test]
    fn densify_guard() {
        let t = FactoredTensor3::unit_weights(
            random_components(DENSE_DIM_LIMIT + 1, 1, 0, ComponentDistribution::UnitSphere).unwrap(),
        )
        .unwrap();
        assert!(matches!(t.densify(), Err(Error::Resource(_))));
    }

    #[test]
    fn random_components_modes() {
        let a = random_components(10, 5, 1, ComponentDistribution::UnitSphere).unwrap();
        assert!(column_norms(&a).iter().all(|n| (n - 1.0).abs() < 1e-12));
        let g = random_components(500, 50, 1, ComponentDistribution::Gaussian).unwrap();
        assert!(column_norms(&g).iter().all(|n| (0.5..=2.0).contains(n)));
        let again = random_components(10, 5, 1, ComponentDistribution::UnitSphere).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn unnormalized_absorbs_norms() {
        let raw = random_components(6, 4, 3, ComponentDistribution::Gaussian).unwrap();
        let t = FactoredTensor3::from_unnormalized(raw.clone(), Array1::ones(4)).unwrap();
        let x = array![0.1, -0.4, 0.2, 0.7, 0.0, 0.3];
        let y = raw.t().dot(&x);
        let direct: f64 = y.iter().map(|v| v * v * v).sum();
        assert!((t.cubic_form(x.view()).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn weight_ratio_reported() {
        let t = FactoredTensor3::new(Array2::eye(2), array![0.5, -2.0]).unwrap();
        assert_eq!(t.weight_ratio(), 4.0);
    }
}
