use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::experiments::SeedMetrics;
use crate::error::{Error, Result};

pub const HASH_PREFIX: &str = "# config_hash=";
pub const REPORT_FILE: &str = "report.json";
pub const PER_SEED_FILE: &str = "per_seed.csv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    /// Summary of the finite values; `None` if there are none.
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        let (q1, q3) = (q(0.25), q(0.75));
        Some(Self {
            count: v.len(),
            median: q(0.5),
            q1,
            q3,
            iqr: q3 - q1,
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "in")]
    Within,
    #[serde(rename = "==")]
    Equals,
}

impl Comparison {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::AtLeast => ">=",
            Comparison::AtMost => "<=",
            Comparison::Within => "in",
            Comparison::Equals => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCheck {
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    /// One bound, or the two ends of a range.
    pub threshold: Vec<f64>,
    pub passed: bool,
}

impl ThresholdCheck {
    pub fn new(name: &str, value: f64, comparison: Comparison, threshold: Vec<f64>) -> Self {
        let passed = match comparison {
            Comparison::AtLeast => value >= threshold[0],
            Comparison::AtMost => value <= threshold[0],
            Comparison::Equals => value == threshold[0],
            Comparison::Within => threshold[0] <= value && value <= threshold[1],
        };
        Self { name: name.to_string(), value, comparison, threshold, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub library_version: String,
    pub config_hash: String,
    pub kind: ExperimentKind,
    pub name: Option<String>,
    pub d: usize,
    pub k: usize,
    pub seeds_requested: usize,
    pub per_seed: Vec<SeedMetrics>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub success_rate: f64,
    pub checks: Vec<ThresholdCheck>,
    /// Regime warnings and similar non-fatal notes.
    pub flags: Vec<String>,
    pub budget_exceeded: bool,
    pub passed: bool,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    /// Extra run-level results (for example fitted envelopes).
    pub summary: Option<serde_json::Value>,
}

impl RunReport {
    pub(crate) fn aggregate(per_seed: &[SeedMetrics]) -> BTreeMap<String, Aggregate> {
        let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for m in per_seed {
            for (k, v) in &m.values {
                columns.entry(k.clone()).or_default().push(*v);
            }
        }
        columns.into_iter().filter_map(|(k, v)| Aggregate::of(&v).map(|a| (k, a))).collect()
    }

    pub fn aggregate_table_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "count", "median", "q1", "q3", "iqr", "mean", "min", "max"])?;
        w.write_record([
            "success_rate",
            &self.per_seed.len().to_string(),
            &fmt(self.success_rate),
            "",
            "",
            "",
            "",
            "",
            "",
        ])?;
        for (name, a) in &self.aggregates {
            w.write_record([
                name.as_str(),
                &a.count.to_string(),
                &fmt(a.median),
                &fmt(a.q1),
                &fmt(a.q3),
                &fmt(a.iqr),
                &fmt(a.mean),
                &fmt(a.min),
                &fmt(a.max),
            ])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn checks_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "value", "comparison", "threshold", "result"])?;
        for c in &self.checks {
            let cmp = serde_json::to_value(c.comparison)?;
            let thr: Vec<String> = c.threshold.iter().map(|t| fmt(*t)).collect();
            w.write_record([
                c.name.as_str(),
                &fmt(c.value),
                cmp.as_str().unwrap_or_default(),
                &thr.join(" "),
                if c.passed { "PASS" } else { "FAIL" },
            ])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .map_err(|e| Error::Format(e.to_string()))
    }
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v}")
}

/// CSV writer that first emits the hash comment line.
pub(crate) fn write_csv(path: &Path, hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(file, "{HASH_PREFIX}{hash}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn per_seed_rows(per_seed: &[SeedMetrics]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut names: Vec<String> = Vec::new();
    for m in per_seed {
        for k in m.values.keys() {
            if !names.contains(k) {
                names.push(k.clone());
            }
        }
    }
    names.sort();
    let mut header = vec!["seed".to_string(), "success".to_string()];
    header.extend(names.iter().cloned());
    let rows = per_seed
        .iter()
        .map(|m| {
            let mut row = vec![m.seed.to_string(), m.success.to_string()];
            row.extend(names.iter().map(|n| m.values.get(n).map(|v| fmt(*v)).unwrap_or_default()));
            row
        })
        .collect();
    (header, rows)
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    Ok(serde_json::from_slice(&fs::read(dir.join(REPORT_FILE))?)?)
}

/// Checks that every CSV, JSON-lines and JSON output in `dir` carries
/// `hash`.
pub fn verify_hashes(dir: &Path, hash: &str) -> Result<usize> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<Vec<_>>>()?;
    entries.sort_by_key(|e| e.file_name());
    let mut checked = 0;
    for e in entries {
        let path = e.path();
        let ext = path.extension().and_then(|x| x.to_str()).unwrap_or_default().to_string();
        let found = match ext.as_str() {
            "csv" => {
                let mut line = String::new();
                BufReader::new(fs::File::open(&path)?).read_line(&mut line)?;
                line.trim_end().strip_prefix(HASH_PREFIX).map(str::to_string)
            }
            "jsonl" => {
                let mut line = String::new();
                BufReader::new(fs::File::open(&path)?).read_line(&mut line)?;
                serde_json::from_str::<serde_json::Value>(&line)?
                    .get("config_hash")
                    .and_then(|v| v.as_str())
                    .map(str::to_string)
            }
            "json" => serde_json::from_slice::<serde_json::Value>(&fs::read(&path)?)?
                .get("config_hash")
                .and_then(|v| v.as_str())
                .map(str::to_string),
            _ => continue,
        };
        if found.as_deref() != Some(hash) {
            return Err(Error::Precondition(format!(
                "{} has config hash {} but the report has {hash}",
                path.display(),
                found.as_deref().unwrap_or("(none)")
            )));
        }
        checked += 1;
    }
    Ok(checked)
}

/// Rendering of a report for the terminal.
pub fn render(report: &RunReport, json: bool) -> Result<String> {
    if json {
        let mut s = serde_json::to_string_pretty(report)?;
        s.push('\n');
        Ok(s)
    } else {
        Ok(format!("{}{}", report.aggregate_table_csv()?, report.checks_csv()?))
    }
}

/// Evaluates the thresholds that apply to the run.
pub(crate) fn evaluate(cfg: &ExperimentConfig, per_seed: &[SeedMetrics]) -> Vec<ThresholdCheck> {
    let th = &cfg.thresholds;
    let n = per_seed.len().max(1) as f64;
    let success_rate = per_seed.iter().filter(|m| m.success).count() as f64 / n;
    let column = |name: &str| per_seed.iter().filter_map(|m| m.values.get(name).copied()).collect::<Vec<f64>>();
    let columns_matching = |suffix: &str| {
        per_seed
            .iter()
            .flat_map(|m| m.values.iter().filter(|(k, _)| k.split('@').next() == Some(suffix)).map(|(_, v)| *v))
            .collect::<Vec<f64>>()
    };
    let mut out = Vec::new();
    let min = |v: Vec<f64>| v.into_iter().fold(f64::INFINITY, f64::min);
    let max = |v: Vec<f64>| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let median = |v: Vec<f64>| Aggregate::of(&v).map(|a| a.median).unwrap_or(f64::NAN);
    match cfg.kind {
        ExperimentKind::Dynamics | ExperimentKind::NoiseSweep => {
            if let Some(m) = th.min_success_rate {
                out.push(ThresholdCheck::new("success_rate", success_rate, Comparison::AtLeast, vec![m]));
            }
            if let Some(m) = th.min_quadratic_pass_rate {
                let q = columns_matching("quadratic_pass");
                let rate = q.iter().sum::<f64>() / q.len().max(1) as f64;
                out.push(ThresholdCheck::new("quadratic_pass_rate", rate, Comparison::AtLeast, vec![m]));
            }
            if let Some(m) = th.max_noise_norm {
                out.push(ThresholdCheck::new(
                    "max_noise_norm",
                    max(columns_matching("max_noise_norm")),
                    Comparison::AtMost,
                    vec![m],
                ));
            }
        }
        ExperimentKind::Recovery => {
            if let Some(m) = th.min_recovered_fraction {
                out.push(ThresholdCheck::new(
                    "min_recovered_fraction",
                    min(column("recovered_fraction")),
                    Comparison::AtLeast,
                    vec![m],
                ));
            }
            if let Some(m) = th.max_frobenius_per_sqrt_k {
                out.push(ThresholdCheck::new(
                    "max_frobenius_per_sqrt_k",
                    max(column("frobenius_per_sqrt_k")),
                    Comparison::AtMost,
                    vec![m],
                ));
            }
            if let Some(m) = th.max_weight_error {
                out.push(ThresholdCheck::new(
                    "max_weight_error",
                    max(column("max_weight_error")),
                    Comparison::AtMost,
                    vec![m],
                ));
            }
            if let Some(m) = th.expected_components {
                let c = column("components");
                let all = c.iter().all(|&x| x == m as f64);
                let shown = if all { m as f64 } else { c.into_iter().find(|&x| x != m as f64).unwrap_or(f64::NAN) };
                out.push(ThresholdCheck::new("components", shown, Comparison::Equals, vec![m as f64]));
            }
            if let Some(m) = th.min_success_rate {
                out.push(ThresholdCheck::new("success_rate", success_rate, Comparison::AtLeast, vec![m]));
            }
        }
        ExperimentKind::SampleComplexity => {
            if let Some([lo, hi]) = th.error_ratio_range {
                out.push(ThresholdCheck::new(
                    "median_error_ratio",
                    median(column("error_ratio")),
                    Comparison::Within,
                    vec![lo, hi],
                ));
            }
            if let Some([lo, hi]) = th.decomposition_error_ratio_range {
                out.push(ThresholdCheck::new(
                    "median_decomposition_error_ratio",
                    median(column("decomposition_error_ratio")),
                    Comparison::Within,
                    vec![lo, hi],
                ));
            }
            if let Some(m) = th.min_success_rate {
                out.push(ThresholdCheck::new("success_rate", success_rate, Comparison::AtLeast, vec![m]));
            }
        }
        ExperimentKind::Probe => {
            if th.require_probe_pass.unwrap_or(false) {
                out.push(ThresholdCheck::new("probe_pass_rate", success_rate, Comparison::AtLeast, vec![1.0]));
            }
            if let Some(m) = th.min_success_rate {
                out.push(ThresholdCheck::new("success_rate", success_rate, Comparison::AtLeast, vec![m]));
            }
        }
    }
    out
}

/// Threshold fields that an experiment kind evaluates.
pub(crate) fn applicable_thresholds(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Dynamics | ExperimentKind::NoiseSweep => {
            &["success_correlation", "min_success_rate", "min_quadratic_pass_rate", "max_noise_norm"]
        }
        ExperimentKind::Recovery => &[
            "recovery_correlation",
            "min_recovered_fraction",
            "max_frobenius_per_sqrt_k",
            "max_weight_error",
            "expected_components",
            "min_success_rate",
        ],
        ExperimentKind::SampleComplexity => {
            &["error_ratio_range", "decomposition_error_ratio_range", "min_success_rate"]
        }
        ExperimentKind::Probe => &["require_probe_pass", "min_success_rate"],
    }
}
