//! Latent-variable models: multiview mixtures and spherical Gaussian
//! mixtures, their samplers, and moment-tensor estimators.
//!
//! In a multiview mixture a hidden state `h ∈ {0..k}` is drawn from the
//! priors, and each view is `z_l = a_h + η_l` with independent noise. The
//! cross-view third moment of any three views is `Σ λ_j a_j^{⊗3}`.

mod gmm;
mod moments;
mod persist;
mod rip;

pub use gmm::{gmm_modified_moment, gmm_population_moment, gmm_raw_moment, SphericalGmm};
pub use moments::{empirical_third_moment, ImplicitMomentTensor};
pub use persist::{load_batch, save_batch, BatchMetadata};
pub use rip::{check_weak_rip, WeakRipReport};

use ndarray::{Array1, Array2, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{column_norms, norm};
use crate::rng;
use crate::tensor::{random_components, ComponentDistribution, FactoredTensor3};

const UNIT_TOL: f64 = 1e-10;
const PRIOR_TOL: f64 = 1e-12;

/// Per-view noise law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// `η ~ N(0, ζ² I)`.
    SphericalGaussian,
    /// `η_i ~ N(0, (ζ s_i)²)` with a fixed per-coordinate profile `s`.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    /// One shared `d × k` factor, or one per view for the asymmetric model.
    factors: Vec<Array2<f64>>,
    priors: Array1<f64>,
    noise: NoiseKind,
    zeta: f64,
    views: usize,
}

pub(crate) fn validate_priors(priors: &Array1<f64>) -> Result<()> {
    if priors.is_empty() || priors.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidArgument("priors must be positive".into()));
    }
    let s = priors.sum();
    if (s - 1.0).abs() > PRIOR_TOL {
        return Err(Error::InvalidArgument(format!("priors sum to {s}, expected 1")));
    }
    Ok(())
}

pub(crate) fn validate_unit_columns(m: &Array2<f64>) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidArgument("factor must be nonempty".into()));
    }
    for (j, n) in column_norms(m).iter().enumerate() {
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidArgument(format!("factor column {j} has norm {n}")));
        }
    }
    Ok(())
}

impl MixtureModel {
    /// Exchangeable model: every view shares the factor `a`.
    pub fn new(factor: Array2<f64>, priors: Array1<f64>, noise: NoiseKind, zeta: f64, views: usize) -> Result<Self> {
        Self::build(vec![factor], priors, noise, zeta, views)
    }

    /// Three-view model with distinct factors `A`, `B`, `C`.
    pub fn asymmetric(factors: [Array2<f64>; 3], priors: Array1<f64>, noise: NoiseKind, zeta: f64) -> Result<Self> {
        let [a, b, c] = factors;
        if a.dim() != b.dim() || a.dim() != c.dim() {
            return Err(Error::InvalidArgument("view factors must share shape".into()));
        }
        Self::build(vec![a, b, c], priors, noise, zeta, 3)
    }

    /// Unit-sphere factor, uniform priors, spherical noise.
    pub fn random(d: usize, k: usize, zeta: f64, views: usize, seed: u64) -> Result<Self> {
        let a = random_components(d, k, seed, ComponentDistribution::UnitSphere)?;
        Self::new(a, Array1::from_elem(k, 1.0 / k as f64), NoiseKind::SphericalGaussian, zeta, views)
    }

    fn build(
        factors: Vec<Array2<f64>>,
        priors: Array1<f64>,
        noise: NoiseKind,
        zeta: f64,
        views: usize,
    ) -> Result<Self> {
        for f in &factors {
            validate_unit_columns(f)?;
            check_len(priors.len(), f.ncols())?;
        }
        validate_priors(&priors)?;
        if views < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 views, got {views}")));
        }
        if !(zeta >= 0.0) || !zeta.is_finite() {
            return Err(Error::InvalidArgument(format!("noise scale {zeta} must be finite and nonnegative")));
        }
        if let NoiseKind::Custom(s) = &noise {
            check_len(factors[0].nrows(), s.len())?;
        }
        Ok(Self { factors, priors, noise, zeta, views })
    }

    pub fn dim(&self) -> usize {
        self.factors[0].nrows()
    }

    pub fn rank(&self) -> usize {
        self.priors.len()
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn priors(&self) -> &Array1<f64> {
        &self.priors
    }

    pub fn noise(&self) -> &NoiseKind {
        &self.noise
    }

    pub fn is_symmetric(&self) -> bool {
        self.factors.len() == 1
    }

    /// Factor used by view `l` (views beyond the third reuse the third).
    pub fn factor(&self, view: usize) -> &Array2<f64> {
        &self.factors[view.min(self.factors.len() - 1)]
    }

    /// `max λ / min λ`.
    pub fn prior_ratio(&self) -> f64 {
        let max = self.priors.iter().cloned().fold(0.0, f64::max);
        let min = self.priors.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Population cross-view third moment `Σ λ_j a_j ⊗ b_j ⊗ c_j`.
    pub fn population_tensor(&self) -> Result<FactoredTensor3> {
        if self.is_symmetric() {
            FactoredTensor3::new(self.factors[0].clone(), self.priors.clone())
        } else {
            FactoredTensor3::new_asymmetric(
                [self.factors[0].clone(), self.factors[1].clone(), self.factors[2].clone()],
                self.priors.clone(),
            )
        }
    }

    /// Expected noise norm for spherical noise, `ζ√d`.
    pub fn nominal_noise_norm(&self) -> f64 {
        match &self.noise {
            NoiseKind::SphericalGaussian => self.zeta * (self.dim() as f64).sqrt(),
            NoiseKind::Custom(s) => self.zeta * s.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    fn noise_std(&self, i: usize) -> f64 {
        match &self.noise {
            NoiseKind::SphericalGaussian => self.zeta,
            NoiseKind::Custom(s) => self.zeta * s[i],
        }
    }
}

/// Observed views of `n` samples; column `τ` of view `l` is `z_l^{(τ)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    views: Vec<Array2<f64>>,
    labels: Option<Vec<usize>>,
}

impl SampleBatch {
    pub fn new(views: Vec<Array2<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        let first = views.first().ok_or_else(|| Error::InvalidArgument("batch needs at least one view".into()))?;
        let shape = first.dim();
        if shape.1 == 0 {
            return Err(Error::InvalidArgument("batch is empty".into()));
        }
        if views.iter().any(|v| v.dim() != shape) {
            return Err(Error::InvalidArgument("views must share d and n".into()));
        }
        if let Some(l) = &labels {
            check_len(shape.1, l.len())?;
        }
        Ok(Self { views, labels })
    }

    pub fn dim(&self) -> usize {
        self.views[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.views[0].ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn view(&self, l: usize) -> &Array2<f64> {
        &self.views[l]
    }

    pub fn views(&self) -> &[Array2<f64>] {
        &self.views
    }

    /// True hidden states. For evaluation only.
    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Same samples with the views reordered.
    pub fn with_view_order(&self, order: &[usize]) -> Result<Self> {
        let views = order
            .iter()
            .map(|&l| self.views.get(l).cloned().ok_or_else(|| Error::InvalidArgument(format!("no view {l}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(views, self.labels.clone())
    }

    /// First `n` samples.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        let views = self.views.iter().map(|v| v.slice(ndarray::s![.., ..n]).to_owned()).collect();
        Self::new(views, self.labels.as_ref().map(|l| l[..n].to_vec()))
    }

    /// Normalized first-view samples, used as power-iteration starts.
    /// Zero samples are skipped.
    pub fn normalized_first_view(&self) -> Vec<Array1<f64>> {
        self.views[0]
            .columns()
            .into_iter()
            .filter_map(|c| {
                let n = norm(c);
                (n > 0.0).then(|| c.to_owned() / n)
            })
            .collect()
    }
}

/// Draws `n` samples. Each sample consumes, in order, one state draw and
/// then `d` normals per view, so batches are a pure function of the seed.
pub fn sample_multiview(model: &MixtureModel, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let d = model.dim();
    let states =
        WeightedIndex::new(model.priors.iter().copied()).map_err(|e| Error::InvalidArgument(format!("priors: {e}")))?;
    let mut rng = rng::seeded(seed);
    let mut views: Vec<Array2<f64>> = (0..model.views).map(|_| Array2::zeros((d, n))).collect();
    let mut labels = Vec::with_capacity(n);
    for tau in 0..n {
        let h = states.sample(&mut rng);
        labels.push(h);
        for (l, view) in views.iter_mut().enumerate() {
            let a = model.factor(l).column(h);
            let mut col = view.column_mut(tau);
            for i in 0..d {
                let eta: f64 = rng.sample(StandardNormal);
                col[i] = a[i] + model.noise_std(i) * eta;
            }
        }
    }
    SampleBatch::new(views, Some(labels))
}

/// Signal-to-noise ratio; infinite when the noise vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Snr {
    Finite(f64),
    Infinite,
}

impl Snr {
    pub fn from_noise_norm(noise_norm: f64) -> Self {
        if noise_norm > 0.0 {
            Snr::Finite(1.0 / noise_norm)
        } else {
            Snr::Infinite
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Snr::Finite(v) => v,
            Snr::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrReport {
    /// `1 / mean_τ ‖z₁^{(τ)} − a_{h(τ)}‖`.
    pub empirical: Snr,
    pub mean_noise_norm: f64,
    /// `E‖η‖` under the model's nominal scale (`ζ√d` for spherical noise).
    pub nominal_noise_norm: f64,
    pub nominal: Snr,
}

pub fn snr(batch: &SampleBatch, model: &MixtureModel) -> Result<SnrReport> {
    let labels = batch.labels().ok_or_else(|| Error::InvalidArgument("SNR needs labels".into()))?;
    check_len(model.dim(), batch.dim())?;
    let a = model.factor(0);
    let mut total = 0.0;
    for (tau, &h) in labels.iter().enumerate() {
        if h >= model.rank() {
            return Err(Error::InvalidArgument(format!("label {h} out of range")));
        }
        total += norm((&batch.view(0).column(tau) - &a.column(h)).view());
    }
    let mean_noise_norm = total / labels.len() as f64;
    let nominal_noise_norm = model.nominal_noise_norm();
    Ok(SnrReport {
        empirical: Snr::from_noise_norm(mean_noise_norm),
        mean_noise_norm,
        nominal_noise_norm,
        nominal: Snr::from_noise_norm(nominal_noise_norm),
    })
}

/// Spherical noise scale giving nominal SNR `target` in dimension `d`.
pub fn zeta_for_snr(target: f64, d: usize) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::InvalidArgument(format!("target SNR {target} must be positive")));
    }
    Ok(1.0 / (target * (d as f64).sqrt()))
}

/// The SNR scale `√max(k,d) / d^{1−β}` below which sample initialization
/// is not expected to land in the basin of attraction. Returned without
/// a constant factor.
pub fn snr_threshold(d: usize, k: usize, beta: f64) -> f64 {
    (d.max(k) as f64).sqrt() / (d as f64).powf(1.0 - beta)
}

/// Ratio of a sample's correlation with its own component to the random
/// cross-talk level; diagnostic for initialization quality.
pub fn init_correlation(sample: ArrayView1<f64>, component: ArrayView1<f64>) -> f64 {
    let n = norm(sample);
    if n == 0.0 {
        0.0
    } else {
        sample.dot(&component) / n
    }
}
