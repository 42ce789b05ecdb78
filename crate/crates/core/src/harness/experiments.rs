//! Per-seed experiment bodies. Every seed derives its randomness from its
//! own seed value only, so results do not depend on scheduling.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, ModelKind, ProbeCheck, SourceKind};
use crate::decompose::{decompose, match_and_score, DecompositionResult};
use crate::error::Result;
use crate::linalg::{normalize, OrthoBasis};
use crate::lvm::{empirical_third_moment, sample_multiview, snr, ImplicitMomentTensor, MixtureModel, SampleBatch};
use crate::power::{correlated_start, quadratic_progress, run_power, run_power_with_shadow, PowerConfig, TraceLevel};
use crate::probe;
use crate::rng;
use crate::tensor::{
    random_components, scale_noise_to, ComponentDistribution, DenseTensor3, FactoredTensor3, PerturbedTensor,
};

const SPECTRAL_RESTARTS: usize = 16;
const SPECTRAL_ITERS: usize = 30;
const DEFAULT_INIT_NOISE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub success: bool,
    pub values: BTreeMap<String, f64>,
}

/// Auxiliary per-row output of one seed.
pub(crate) struct SeedResult {
    pub metrics: SeedMetrics,
    pub rows: Vec<Vec<String>>,
    pub detail: Option<serde_json::Value>,
    pub hypotheses: Option<probe::HypothesisReport>,
}

/// Header of the auxiliary table written for each experiment kind.
pub(crate) fn table_spec(kind: ExperimentKind) -> (&'static str, &'static [&'static str]) {
    match kind {
        ExperimentKind::Dynamics | ExperimentKind::Probe => {
            ("trajectories", &["seed", "iteration", "correlation", "noise_norm"])
        }
        ExperimentKind::NoiseSweep => {
            ("trajectories", &["seed", "noise_scale", "iteration", "correlation", "noise_norm"])
        }
        ExperimentKind::Recovery => {
            ("components", &["seed", "component", "correlation", "weight_true", "weight_estimate"])
        }
        ExperimentKind::SampleComplexity => ("moment_errors", &["seed", "samples", "frobenius_error"]),
    }
}

/// State shared by every seed of a run, built once from the base seed.
pub(crate) struct Shared {
    /// Perturbation at unit spectral norm (estimated), when the run uses one.
    pub unit_noise: Option<DenseTensor3>,
}

pub(crate) fn prepare(cfg: &ExperimentConfig) -> Result<Shared> {
    let wants_noise = match cfg.kind {
        ExperimentKind::Dynamics => cfg.noise_scale.is_some_and(|s| s > 0.0),
        ExperimentKind::NoiseSweep => true,
        _ => false,
    };
    let unit_noise = if wants_noise {
        let raw = DenseTensor3::random_symmetric(cfg.d, rng::child_seed(cfg.seeds.base, 0xE))?;
        Some(scale_noise_to(&raw, 1.0, SPECTRAL_RESTARTS, SPECTRAL_ITERS, rng::child_seed(cfg.seeds.base, 0xF))?)
    } else {
        None
    };
    Ok(Shared { unit_noise })
}

pub(crate) fn run_seed(cfg: &ExperimentConfig, shared: &Shared, seed: u64) -> Result<SeedResult> {
    match cfg.kind {
        ExperimentKind::Dynamics => {
            let scale = cfg.noise_scale.unwrap_or(0.0);
            let (values, success, rows) = dynamics_seed(cfg, shared, seed, scale, false)?;
            Ok(SeedResult { metrics: SeedMetrics { seed, success, values }, rows, detail: None, hypotheses: None })
        }
        ExperimentKind::NoiseSweep => noise_sweep_seed(cfg, shared, seed),
        ExperimentKind::Recovery => recovery_seed(cfg, seed),
        ExperimentKind::SampleComplexity => sample_complexity_seed(cfg, seed),
        ExperimentKind::Probe => probe_seed(cfg, seed),
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Random unit-norm components, unit weights, for one seed.
pub(crate) fn dynamics_tensor(cfg: &ExperimentConfig, seed: u64) -> Result<FactoredTensor3> {
    FactoredTensor3::unit_weights(random_components(
        cfg.d,
        cfg.k,
        rng::child_seed(seed, 0),
        ComponentDistribution::UnitSphere,
    )?)
}

fn success_level(cfg: &ExperimentConfig) -> f64 {
    cfg.thresholds.success_correlation.unwrap_or(1.0 - cfg.power.convergence_gamma)
}

type SeedOutcome = (BTreeMap<String, f64>, bool, Vec<Vec<String>>);

fn dynamics_seed(cfg: &ExperimentConfig, shared: &Shared, seed: u64, scale: f64, sweep: bool) -> Result<SeedOutcome> {
    let t = dynamics_tensor(cfg, seed)?;
    let [lo, hi] = cfg.init_correlation.expect("validated");
    let mut r = rng::stream(seed, 1);
    let c0 = if hi > lo { r.random_range(lo..=hi) } else { lo };
    let x0 = correlated_start(&mut r, t.component(0), c0)?;
    let pcfg = PowerConfig { track_target: Some(0), trace_level: TraceLevel::Norms, ..cfg.power.clone() };
    let noise_norm = scale * (cfg.k as f64).sqrt() / cfg.d as f64;
    let trace = match (&shared.unit_noise, scale > 0.0) {
        (Some(unit), true) => {
            let perturbed = PerturbedTensor::with_known_norm(t.clone(), unit.scaled(noise_norm), noise_norm)?;
            run_power_with_shadow(&perturbed, x0.view(), &pcfg, Some(&t))?
        }
        _ => run_power(&t, x0.view(), &pcfg, Some(&t))?,
    };
    let corrs = trace.correlations();
    let check = quadratic_progress(&corrs, cfg.d, cfg.k);
    let final_corr = trace.final_correlation.unwrap_or(0.0).abs();
    let success = final_corr >= success_level(cfg);
    let noise = trace.noise_norms();
    let mut v = BTreeMap::new();
    v.insert("init_correlation".into(), c0);
    v.insert("final_correlation".into(), final_corr);
    v.insert("iterations".into(), trace.iterations as f64);
    v.insert("quadratic_pass".into(), f64::from(u8::from(check.passed)));
    v.insert("quadratic_checked".into(), check.checked as f64);
    if !noise.is_empty() {
        v.insert("max_noise_norm".into(), noise.iter().cloned().fold(0.0, f64::max));
    }
    let rows = trace
        .steps
        .iter()
        .map(|s| {
            let mut row = vec![seed.to_string()];
            if sweep {
                row.push(fmt(scale));
            }
            row.extend([s.iteration.to_string(), opt(s.target_correlation), opt(s.noise_component_norm)]);
            row
        })
        .collect();
    Ok((v, success, rows))
}

fn noise_sweep_seed(cfg: &ExperimentConfig, shared: &Shared, seed: u64) -> Result<SeedResult> {
    let mut values = BTreeMap::new();
    let mut success = true;
    let mut rows = Vec::new();
    for &scale in cfg.noise_scales.as_deref().expect("validated") {
        let (v, ok, r) = dynamics_seed(cfg, shared, seed, scale, true)?;
        success &= ok;
        for (name, x) in v {
            values.insert(format!("{name}@{scale}"), x);
        }
        rows.extend(r);
    }
    Ok(SeedResult { metrics: SeedMetrics { seed, success, values }, rows, detail: None, hypotheses: None })
}

/// Random orthonormal `d × d` matrix.
fn random_orthonormal(d: usize, seed: u64) -> Result<Array2<f64>> {
    let mut r = rng::seeded(seed);
    let mut basis = OrthoBasis::new(d);
    while basis.rank() < d {
        basis.push(rng::gaussian_vec(&mut r, d, 1.0).view());
    }
    let mut a = Array2::zeros((d, d));
    for (j, v) in basis.vectors().iter().enumerate() {
        a.column_mut(j).assign(v);
    }
    Ok(a)
}

pub(crate) fn orthogonal_model(cfg: &ExperimentConfig, seed: u64) -> Result<FactoredTensor3> {
    let a = random_orthonormal(cfg.d, rng::child_seed(seed, 0))?;
    let [lo, hi] = cfg.weight_range.unwrap_or([1.0, 1.0]);
    let mut r = rng::stream(seed, 2);
    let w: Array1<f64> = (0..cfg.k).map(|_| if hi > lo { r.random_range(lo..=hi) } else { lo }).collect();
    FactoredTensor3::new(a, w)
}

pub(crate) fn multiview_model(cfg: &ExperimentConfig, seed: u64) -> Result<MixtureModel> {
    MixtureModel::random(cfg.d, cfg.k, cfg.noise_level()?, 3, rng::child_seed(seed, 0))
}

pub(crate) fn multiview_batch(model: &MixtureModel, n: usize, seed: u64) -> Result<SampleBatch> {
    sample_multiview(model, n, rng::child_seed(seed, 1))
}

fn decompose_source(
    source: SourceKind,
    truth: &FactoredTensor3,
    batch: &SampleBatch,
    inits: &[Array1<f64>],
    cfg: &ExperimentConfig,
) -> Result<DecompositionResult> {
    match source {
        SourceKind::Exact => decompose(truth, inits, &cfg.power, &cfg.cluster),
        SourceKind::Empirical => decompose(&empirical_third_moment(batch)?, inits, &cfg.power, &cfg.cluster),
        SourceKind::Implicit => decompose(&ImplicitMomentTensor::new(batch)?, inits, &cfg.power, &cfg.cluster),
    }
}

fn recovery_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult> {
    let mut values = BTreeMap::new();
    let (truth, result) = match cfg.model.unwrap_or_default() {
        ModelKind::Orthogonal => {
            let truth = orthogonal_model(cfg, seed)?;
            let eps = cfg.init_noise.unwrap_or(DEFAULT_INIT_NOISE);
            let mut r = rng::stream(seed, 3);
            let inits = (0..cfg.k)
                .map(|j| normalize(&truth.component(j) + &(rng::unit_vector(&mut r, cfg.d) * eps)))
                .collect::<Result<Vec<_>>>()?;
            let result = decompose(&truth, &inits, &cfg.power, &cfg.cluster)?;
            (truth, result)
        }
        ModelKind::Multiview => {
            let model = multiview_model(cfg, seed)?;
            let truth = model.population_tensor()?;
            let batch = multiview_batch(&model, cfg.n.expect("validated"), seed)?;
            let used = cfg.init_count.unwrap_or(batch.len()).min(batch.len());
            let inits: Vec<Array1<f64>> = batch.normalized_first_view().into_iter().take(used).collect();
            let labels = batch.labels().expect("sampled batches carry labels");
            let mut seen = vec![false; cfg.k];
            for &l in &labels[..used] {
                seen[l] = true;
            }
            values.insert("coverage".into(), seen.iter().filter(|&&s| s).count() as f64 / cfg.k as f64);
            values.insert("snr".into(), snr(&batch, &model)?.empirical.value());
            let result = decompose_source(cfg.source.unwrap_or_default(), &truth, &batch, &inits, cfg)?;
            (truth, result)
        }
    };
    let threshold = cfg.thresholds.recovery_correlation.unwrap_or(0.95);
    values.insert("components".into(), result.len() as f64);
    values.insert("dropped_duplicates".into(), result.dropped_duplicates as f64);
    let mut rows = Vec::new();
    if result.is_empty() {
        values.insert("recovered_fraction".into(), 0.0);
        for j in 0..cfg.k {
            rows.push(vec![seed.to_string(), j.to_string(), String::new(), fmt(truth.weights()[j]), String::new()]);
        }
        return Ok(SeedResult {
            metrics: SeedMetrics { seed, success: false, values },
            rows,
            detail: None,
            hypotheses: None,
        });
    }
    let report = match_and_score(result.estimates.view(), &truth)?;
    let recovered = report.recovered(threshold) as f64 / cfg.k as f64;
    let mut estimate_of = vec![None; cfg.k];
    for (i, p) in report.permutation.iter().enumerate() {
        if let Some(j) = p {
            estimate_of[*j] = Some(i);
        }
    }
    let mut max_weight_error: f64 = 0.0;
    let mut min_corr = f64::INFINITY;
    for (j, (&corr, est)) in report.per_component_correlations.iter().zip(&estimate_of).enumerate() {
        let w_est = est.map(|i| result.weights[i]);
        if let Some(w) = w_est {
            max_weight_error = max_weight_error.max((w - truth.weights()[j]).abs());
        }
        min_corr = min_corr.min(corr.unwrap_or(0.0));
        rows.push(vec![seed.to_string(), j.to_string(), opt(corr), fmt(truth.weights()[j]), opt(w_est)]);
    }
    values.insert("recovered_fraction".into(), recovered);
    values.insert("min_correlation".into(), min_corr);
    values.insert("frobenius_error".into(), report.frobenius_error);
    values.insert("frobenius_per_sqrt_k".into(), report.frobenius_error / (cfg.k as f64).sqrt());
    values.insert("max_weight_error".into(), max_weight_error);
    let th = &cfg.thresholds;
    let success = th.min_recovered_fraction.is_none_or(|m| recovered >= m)
        && th.max_frobenius_per_sqrt_k.is_none_or(|m| report.frobenius_error / (cfg.k as f64).sqrt() <= m)
        && th.max_weight_error.is_none_or(|m| max_weight_error <= m)
        && th.expected_components.is_none_or(|m| result.len() == m);
    Ok(SeedResult { metrics: SeedMetrics { seed, success, values }, rows, detail: None, hypotheses: None })
}

fn sample_complexity_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult> {
    let sizes = cfg.sample_sizes.as_deref().expect("validated");
    let n = cfg.n.expect("validated");
    let total = sizes.iter().copied().max().unwrap_or(0).max(n);
    let model = multiview_model(cfg, seed)?;
    let truth = model.population_tensor()?;
    let dense_truth = truth.densify()?;
    let batch = multiview_batch(&model, total, seed)?;
    let mut values = BTreeMap::new();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for &m in sizes {
        let err = empirical_third_moment(&batch.truncated(m)?)?.sub(&dense_truth)?.frobenius_norm();
        values.insert(format!("moment_error_n{m}"), err);
        rows.push(vec![seed.to_string(), m.to_string(), fmt(err)]);
        errors.push(err);
    }
    let ratio = errors[0] / errors[errors.len() - 1];
    values.insert("error_ratio".into(), ratio);

    let used = cfg.init_count.unwrap_or(n).min(n);
    let inits: Vec<Array1<f64>> = batch.normalized_first_view().into_iter().take(used).collect();
    let full = batch.truncated(n)?;
    let exact = decompose(&truth, &inits, &cfg.power, &cfg.cluster)?;
    let empirical = decompose_source(cfg.source.unwrap_or(SourceKind::Empirical), &truth, &full, &inits, cfg)?;
    let exact_err = frobenius_or_inf(&exact, &truth)?;
    let emp_err = frobenius_or_inf(&empirical, &truth)?;
    values.insert("decomposition_error_exact".into(), exact_err);
    values.insert("decomposition_error_empirical".into(), emp_err);
    values.insert("decomposition_error_ratio".into(), emp_err / exact_err);
    values.insert("components_exact".into(), exact.len() as f64);
    values.insert("components_empirical".into(), empirical.len() as f64);
    let th = &cfg.thresholds;
    let success = th.error_ratio_range.is_none_or(|[lo, hi]| (lo..=hi).contains(&ratio))
        && th.decomposition_error_ratio_range.is_none_or(|[lo, hi]| (lo..=hi).contains(&(emp_err / exact_err)));
    Ok(SeedResult { metrics: SeedMetrics { seed, success, values }, rows, detail: None, hypotheses: None })
}

fn frobenius_or_inf(result: &DecompositionResult, truth: &FactoredTensor3) -> Result<f64> {
    if result.is_empty() {
        return Ok(f64::INFINITY);
    }
    Ok(match_and_score(result.estimates.view(), truth)?.frobenius_error)
}

fn probe_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult> {
    let spec = cfg.probe.as_ref().expect("validated");
    let (d, k) = (cfg.d, cfg.k);
    let mut values = BTreeMap::new();
    let mut rows = Vec::new();
    let mut hypotheses = None;
    let (passed, detail) = match spec.check {
        ProbeCheck::Conditioning | ProbeCheck::IterativeConditioning => {
            let trials = spec.trials.unwrap_or(10_000);
            let rep = if spec.check == ProbeCheck::Conditioning {
                probe::check_conditioning_lemma(d, k, spec.sigma2.unwrap_or(1.0), trials, seed)?
            } else {
                probe::check_iterative_conditioning(d, k, spec.chain_length.unwrap_or(3), trials, seed)?
            };
            values.insert("mean_max_z".into(), rep.mean_max_z);
            values.insert("row_cov_max_z".into(), rep.row_cov_max_z);
            values.insert("variance_max_z".into(), rep.variance_max_z);
            values.insert("variance_ratio_min".into(), rep.variance_ratio_min);
            values.insert("variance_ratio_max".into(), rep.variance_ratio_max);
            values.insert("orthogonality_residual".into(), rep.orthogonality_residual);
            values.insert("exact_mean_error".into(), rep.exact_mean_error);
            values.insert("exact_cov_error".into(), rep.exact_cov_error);
            (rep.passed, serde_json::to_value(&rep)?)
        }
        ProbeCheck::FreshRandomness => {
            let rep = probe::check_fresh_randomness(d, k, spec.t.unwrap_or(5), spec.trials.unwrap_or(1000), seed)?;
            let worst = rep.variants.iter().map(|v| v.holds_fraction).fold(1.0, f64::min);
            let min_ratio = rep.variants.iter().map(|v| v.min_ratio).fold(f64::INFINITY, f64::min);
            values.insert("min_holds_fraction".into(), worst);
            values.insert("min_ratio".into(), min_ratio);
            values.insert("precondition_met".into(), f64::from(u8::from(rep.precondition_met)));
            (rep.passed, serde_json::to_value(&rep)?)
        }
        ProbeCheck::MixedNorm => {
            let rep = probe::check_mixed_norm_bound(d, k, spec.trials.unwrap_or(200), seed)?;
            values.insert("max_ratio".into(), rep.max_ratio);
            values.insert("fitted_c".into(), rep.fitted_c);
            (rep.passed, serde_json::to_value(&rep)?)
        }
        ProbeCheck::Hypotheses => {
            let t = dynamics_tensor(cfg, seed)?;
            let [lo, hi] = cfg.init_correlation.unwrap_or([0.3, 0.4]);
            let mut r = rng::stream(seed, 1);
            let c0 = if hi > lo { r.random_range(lo..=hi) } else { lo };
            let x0 = correlated_start(&mut r, t.component(0), c0)?;
            let pcfg = PowerConfig { track_target: Some(0), trace_level: TraceLevel::Full, ..cfg.power.clone() };
            let trace = run_power(&t, x0.view(), &pcfg, Some(&t))?;
            let rep = probe::monitor_hypotheses(&trace, &t, 0)?;
            values.insert("quadratic_pass".into(), f64::from(u8::from(rep.progress_check.passed)));
            values.insert("projection_identity_error".into(), rep.projection_identity_error);
            let maxi = |f: &dyn Fn(&probe::HypothesisRecord) -> Option<f64>| {
                rep.records.iter().filter_map(f).fold(0.0, f64::max)
            };
            values.insert("max_proj_w_inf_times_d".into(), maxi(&|r| r.proj_w_inf) * d as f64);
            values.insert("max_u_norm".into(), maxi(&|r| r.u_norm));
            values.insert("max_v_norm".into(), maxi(&|r| Some(r.v_norm)));
            for rec in &rep.records {
                rows.push(vec![seed.to_string(), rec.step.to_string(), fmt(rec.progress), String::new()]);
            }
            let passed = rep.progress_check.passed && rep.projection_identity_error <= 1e-10;
            let detail = serde_json::to_value(&rep)?;
            hypotheses = Some(rep);
            (passed, detail)
        }
    };
    values.insert("passed".into(), f64::from(u8::from(passed)));
    Ok(SeedResult { metrics: SeedMetrics { seed, success: passed, values }, rows, detail: Some(detail), hypotheses })
}
