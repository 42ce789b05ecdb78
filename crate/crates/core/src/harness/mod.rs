//! Reproducible experiment runner behind the `tpi` command.
//!
//! A run reads an [`ExperimentConfig`], executes one body per seed on the
//! current rayon pool, merges results in seed order and evaluates the
//! thresholds declared in the config. Every output file carries the
//! config's SHA-256 hash.

pub mod cli;
mod config;
mod experiments;
mod report;

#[cfg(test)]
mod tests;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{
    ExperimentConfig, ExperimentKind, ModelKind, ProbeCheck, ProbeSpec, SeedSpec, SourceKind, Thresholds,
    SCHEMA_VERSION,
};
pub use experiments::SeedMetrics;
pub use report::{
    read_report, render, verify_hashes, Aggregate, Comparison, RunReport, ThresholdCheck, HASH_PREFIX, PER_SEED_FILE,
    REPORT_FILE,
};

use crate::error::Result;
use crate::lvm::{save_batch, BatchMetadata};
use crate::tensor::{write_tensor, TensorFile};
use experiments::SeedResult;

/// A finished run: the report plus the tables it writes.
pub struct RunOutput {
    pub report: RunReport,
    table: (&'static str, &'static [&'static str], Vec<Vec<String>>),
    details: Vec<serde_json::Value>,
}

/// Runs every seed of `config` on the current rayon pool.
///
/// With `max_seconds` set, seeds are started in batches of the pool size
/// and no new batch starts once the budget is spent; the report is then
/// marked `budget_exceeded` and holds the finished seeds only.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let start = Instant::now();
    let shared = experiments::prepare(config)?;
    let seeds: Vec<u64> = config.seed_values().collect();
    let threads = rayon::current_num_threads();
    let batch = if config.max_seconds.is_some() { threads.max(1) } else { seeds.len() };
    let mut results: Vec<SeedResult> = Vec::with_capacity(seeds.len());
    let mut budget_exceeded = false;
    for chunk in seeds.chunks(batch) {
        if config.max_seconds.is_some_and(|b| start.elapsed().as_secs_f64() > b) {
            budget_exceeded = true;
            break;
        }
        let done: Vec<Result<SeedResult>> =
            chunk.par_iter().map(|&s| experiments::run_seed(config, &shared, s)).collect();
        for r in done {
            results.push(r?);
        }
    }
    finish(config, results, budget_exceeded, start, threads)
}

fn finish(
    config: &ExperimentConfig,
    results: Vec<SeedResult>,
    budget_exceeded: bool,
    start: Instant,
    threads: usize,
) -> Result<RunOutput> {
    let (table_name, header) = experiments::table_spec(config.kind);
    let mut rows = Vec::new();
    let mut per_seed = Vec::with_capacity(results.len());
    let mut details = Vec::new();
    let mut hypotheses = Vec::new();
    for r in results {
        rows.extend(r.rows);
        per_seed.push(r.metrics);
        details.extend(r.detail);
        hypotheses.extend(r.hypotheses);
    }
    let summary = if hypotheses.is_empty() {
        None
    } else {
        Some(serde_json::to_value(crate::probe::fit_envelopes(&hypotheses)?)?)
    };
    let mut flags = Vec::new();
    if config.rank_regime_violated() {
        flags.push(format!(
            "rank regime: k = {} is at least d^1.5 = {:.1}; recovery guarantees do not cover this setting",
            config.k,
            (config.d as f64).powf(1.5)
        ));
    }
    if budget_exceeded {
        flags.push(format!("budget: {} of {} seeds finished", per_seed.len(), config.seeds.count));
    }
    let checks = report::evaluate(config, &per_seed);
    let success_rate = per_seed.iter().filter(|m| m.success).count() as f64 / per_seed.len().max(1) as f64;
    let passed = !budget_exceeded && checks.iter().all(|c| c.passed);
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        kind: config.kind,
        name: config.name.clone(),
        d: config.d,
        k: config.k,
        seeds_requested: config.seeds.count,
        aggregates: RunReport::aggregate(&per_seed),
        per_seed,
        success_rate,
        checks,
        flags,
        budget_exceeded,
        passed,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        threads,
        summary,
    };
    Ok(RunOutput { report, table: (table_name, header, rows), details })
}

impl RunOutput {
    /// Writes `report.json`, `per_seed.csv`, the kind's auxiliary table
    /// and, where present, `traces.jsonl` and `probe.json`. Returns the
    /// written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let hash = &self.report.config_hash;
        let mut written = Vec::new();

        let (header, rows) = report::per_seed_rows(&self.report.per_seed);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let path = dir.join(PER_SEED_FILE);
        report::write_csv(&path, hash, &header, &rows)?;
        written.push(path);

        let (name, header, rows) = &self.table;
        let path = dir.join(format!("{name}.csv"));
        report::write_csv(&path, hash, header, rows)?;
        written.push(path);

        if matches!(self.report.kind, ExperimentKind::Dynamics | ExperimentKind::NoiseSweep) {
            let path = dir.join("traces.jsonl");
            let mut out = String::new();
            out.push_str(&serde_json::to_string(&serde_json::json!({ "config_hash": hash }))?);
            out.push('\n');
            for r in rows {
                let obj: serde_json::Map<String, serde_json::Value> = header
                    .iter()
                    .zip(r)
                    .map(|(h, v)| {
                        let val = v.parse::<f64>().map(serde_json::Value::from).unwrap_or(serde_json::Value::Null);
                        (h.to_string(), val)
                    })
                    .collect();
                out.push_str(&serde_json::to_string(&obj)?);
                out.push('\n');
            }
            fs::write(&path, out)?;
            written.push(path);
        }

        if !self.details.is_empty() {
            let path = dir.join("probe.json");
            let body = serde_json::json!({ "config_hash": hash, "reports": self.details });
            fs::write(&path, serde_json::to_vec_pretty(&body)?)?;
            written.push(path);
        }

        let path = dir.join(REPORT_FILE);
        fs::write(&path, serde_json::to_vec_pretty(&self.report)?)?;
        written.push(path);
        Ok(written)
    }

    pub fn per_seed_csv(&self, dir: &Path) -> PathBuf {
        dir.join(PER_SEED_FILE)
    }
}

/// Writes the ground truth (and samples, for mixture models) that the
/// config's base seed would use.
pub fn generate(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    fs::create_dir_all(dir)?;
    let hash = config.hash();
    let seed = config.seeds.base;
    let mut written = Vec::new();
    let mut put = |name: &str, file: TensorFile, provenance: &str| -> Result<()> {
        let path = dir.join(name);
        write_tensor(&path, &file, Some(seed), provenance, Some(&hash))?;
        written.push(path);
        Ok(())
    };
    match config.kind {
        ExperimentKind::Dynamics | ExperimentKind::NoiseSweep | ExperimentKind::Probe => {
            put(
                "tensor.tpi3",
                TensorFile::Factored(experiments::dynamics_tensor(config, seed)?),
                "random unit components",
            )?;
            let shared = experiments::prepare(config)?;
            if let Some(noise) = shared.unit_noise {
                let scale =
                    config.noise_scale.or(config.noise_scales.as_ref().and_then(|s| s.last().copied())).unwrap_or(1.0);
                let norm = scale * (config.k as f64).sqrt() / config.d as f64;
                put("noise.tpi3", TensorFile::Dense(noise.scaled(norm)), "symmetric Gaussian perturbation")?;
            }
        }
        ExperimentKind::Recovery if config.model.unwrap_or_default() == ModelKind::Orthogonal => {
            put(
                "tensor.tpi3",
                TensorFile::Factored(experiments::orthogonal_model(config, seed)?),
                "orthonormal components",
            )?;
        }
        ExperimentKind::Recovery | ExperimentKind::SampleComplexity => {
            let model = experiments::multiview_model(config, seed)?;
            put("factor.tpi3", TensorFile::Matrix(model.factor(0).clone()), "mixture means")?;
            put("tensor.tpi3", TensorFile::Factored(model.population_tensor()?), "population moment")?;
            let n = config.n.expect("validated");
            let batch = experiments::multiview_batch(&model, n, seed)?;
            let meta = BatchMetadata {
                dim: config.d,
                samples: n,
                views: batch.view_count(),
                seed: Some(seed),
                zeta: model.zeta(),
                priors: model.priors().to_vec(),
                model_hash: Some(hash.clone()),
                labels: batch.labels().map(<[usize]>::to_vec),
            };
            let stem = dir.join("samples");
            save_batch(&stem, &batch, &meta)?;
            for l in 0..batch.view_count() {
                written.push(dir.join(format!("samples.view{l}.tpi3")));
            }
            written.push(dir.join("samples.batch.json"));
        }
    }
    Ok(written)
}
