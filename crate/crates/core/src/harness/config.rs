use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decompose::ClusterConfig;
use crate::error::{Error, Result};
use crate::power::PowerConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Recovery,
    Dynamics,
    NoiseSweep,
    SampleComplexity,
    Probe,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Recovery => "recovery",
            Self::Dynamics => "dynamics",
            Self::NoiseSweep => "noise-sweep",
            Self::SampleComplexity => "sample-complexity",
            Self::Probe => "probe",
        }
    }
}

/// Ground-truth model for recovery experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Random orthonormal components (`k = d`), weights drawn from
    /// `weight_range`, starts at the components plus a perturbation of norm
    /// `init_noise`.
    Orthogonal,
    /// Multiview mixture with unit-sphere means and uniform priors; starts
    /// are normalized first-view samples.
    #[default]
    Multiview,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    #[default]
    Exact,
    Empirical,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeCheck {
    Conditioning,
    IterativeConditioning,
    FreshRandomness,
    MixedNorm,
    Hypotheses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub check: ProbeCheck,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub chain_length: Option<usize>,
    /// Subspace dimension for the fresh-randomness check.
    #[serde(default)]
    pub t: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub count: usize,
    #[serde(default)]
    pub base: u64,
}

/// Acceptance thresholds. Only the ones that apply to the experiment kind
/// are evaluated; an empty set always passes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Dynamics: a seed succeeds when its final `|⟨x, a₁⟩|` reaches this.
    pub success_correlation: Option<f64>,
    pub min_success_rate: Option<f64>,
    pub min_quadratic_pass_rate: Option<f64>,
    /// Largest shadow noise norm allowed over all seeds and steps.
    pub max_noise_norm: Option<f64>,
    /// Recovery: correlation at which a true component counts as recovered.
    pub recovery_correlation: Option<f64>,
    pub min_recovered_fraction: Option<f64>,
    /// Recovery: `‖Â − A‖_F` over matched pairs, divided by `√k`.
    pub max_frobenius_per_sqrt_k: Option<f64>,
    pub max_weight_error: Option<f64>,
    pub expected_components: Option<usize>,
    /// Sample complexity: accepted range of the moment-error ratio between
    /// the first and last sample size.
    pub error_ratio_range: Option<[f64; 2]>,
    /// Sample complexity: accepted range of empirical over exact
    /// decomposition error.
    pub decomposition_error_ratio_range: Option<[f64; 2]>,
    /// Probe: every seed's check must pass.
    pub require_probe_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    pub d: usize,
    pub k: usize,
    /// Samples per seed (multiview recovery and the largest
    /// sample-complexity run).
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub zeta: Option<f64>,
    /// Target initialization SNR; sets `ζ = 1/(snr·√d)`.
    #[serde(default)]
    pub snr: Option<f64>,
    /// Range for the starting correlation with the tracked component.
    #[serde(default)]
    pub init_correlation: Option<[f64; 2]>,
    #[serde(default)]
    pub init_noise: Option<f64>,
    /// Number of starts drawn from the samples when fewer than `n` are wanted.
    #[serde(default)]
    pub init_count: Option<usize>,
    #[serde(default)]
    pub model: Option<ModelKind>,
    #[serde(default)]
    pub source: Option<SourceKind>,
    #[serde(default)]
    pub weight_range: Option<[f64; 2]>,
    /// Perturbation spectral norm in units of `√k/d`.
    #[serde(default)]
    pub noise_scale: Option<f64>,
    #[serde(default)]
    pub noise_scales: Option<Vec<f64>>,
    #[serde(default)]
    pub sample_sizes: Option<Vec<usize>>,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub power: PowerConfig,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Wall-clock budget; seeds not started when it runs out are skipped.
    #[serde(default)]
    pub max_seconds: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.d == 0 || self.k == 0 {
            return bad("d and k must be at least 1".into());
        }
        if self.seeds.count == 0 {
            return bad("seeds.count must be at least 1".into());
        }
        if self.zeta.is_some() && self.snr.is_some() {
            return bad("give at most one of zeta and snr".into());
        }
        if let Some([lo, hi]) = self.init_correlation {
            if !(0.0 < lo && lo <= hi && hi <= 1.0) {
                return bad(format!("init_correlation [{lo}, {hi}] must satisfy 0 < lo ≤ hi ≤ 1"));
            }
        }
        if let Some([lo, hi]) = self.weight_range {
            if !(0.0 < lo && lo <= hi) {
                return bad(format!("weight_range [{lo}, {hi}] must satisfy 0 < lo ≤ hi"));
            }
        }
        if let Some(b) = self.max_seconds {
            if !(b > 0.0) {
                return bad("max_seconds must be positive".into());
            }
        }
        self.power.validate()?;
        self.cluster.validate()?;
        let allowed = super::report::applicable_thresholds(self.kind);
        if let serde_json::Value::Object(set) = serde_json::to_value(&self.thresholds)? {
            if let Some((name, _)) = set.iter().find(|(name, v)| !v.is_null() && !allowed.contains(&name.as_str())) {
                return bad(format!("threshold `{name}` does not apply to {} experiments", self.kind.name()));
            }
        }
        match self.kind {
            ExperimentKind::Dynamics => {
                self.require(self.init_correlation.is_some(), "init_correlation")?;
                if self.noise_scales.is_some() {
                    return bad("noise_scales belongs to noise-sweep experiments".into());
                }
            }
            ExperimentKind::NoiseSweep => {
                self.require(self.init_correlation.is_some(), "init_correlation")?;
                self.require(self.noise_scales.as_ref().is_some_and(|s| !s.is_empty()), "noise_scales")?;
            }
            ExperimentKind::Recovery => match self.model.unwrap_or_default() {
                ModelKind::Orthogonal => {
                    if self.k != self.d {
                        return bad("orthogonal model needs k = d".into());
                    }
                }
                ModelKind::Multiview => {
                    self.require(self.n.is_some(), "n")?;
                    self.require(self.zeta.is_some() || self.snr.is_some(), "zeta or snr")?;
                }
            },
            ExperimentKind::SampleComplexity => {
                self.require(self.sample_sizes.as_ref().is_some_and(|s| s.len() >= 2), "sample_sizes (at least two)")?;
                self.require(self.n.is_some(), "n")?;
                self.require(self.zeta.is_some() || self.snr.is_some(), "zeta or snr")?;
            }
            ExperimentKind::Probe => self.require(self.probe.is_some(), "probe")?,
        }
        Ok(())
    }

    fn require(&self, present: bool, field: &str) -> Result<()> {
        if present {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{} experiments need `{field}`", self.kind.name())))
        }
    }

    /// Noise scale `ζ`, from `zeta` or `snr`.
    pub fn noise_level(&self) -> Result<f64> {
        match (self.zeta, self.snr) {
            (Some(z), _) => Ok(z),
            (None, Some(s)) => crate::lvm::zeta_for_snr(s, self.d),
            (None, None) => Err(Error::InvalidArgument("need zeta or snr".into())),
        }
    }

    /// `k ≥ d^{1.5}`: outside the rank regime the guarantees cover.
    pub fn rank_regime_violated(&self) -> bool {
        self.k as f64 >= (self.d as f64).powf(1.5)
    }

    /// SHA-256 of the canonical JSON encoding, ignoring the output path.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn seed_values(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds.count as u64).map(move |i| self.seeds.base.wrapping_add(i))
    }
}
