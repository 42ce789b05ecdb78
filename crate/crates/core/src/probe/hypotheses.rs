//! Per-iteration monitors for a power-iteration trace against a known
//! factored tensor.
//!
//! With `x⁽¹⁾` the initialization, `B` the factor matrix with the target
//! column removed and `w⁽ᵗ⁾ = (Bᵀx⁽ᵗ⁾)^{*2}`, step `t` records
//!
//! * `‖P_{⊥X[t−1]} x⁽ᵗ⁾‖` and its complement inside `X[t−1]`,
//! * `‖P_{⊥W[t−2]} w⁽ᵗ⁻¹⁾‖` in ℓ₂ and ℓ∞,
//! * `|⟨a, x⁽ᵗ⁾⟩|` and `⟨a, P_{⊥X[t−1]} x⁽ᵗ⁾⟩`,
//! * `u⁽ᵗ⁾ = P_{⊥X[t−1]} B P_{⊥W[t−2]} w⁽ᵗ⁻¹⁾` and
//!   `v⁽ᵗ⁾ = P_{⊥W[t−1]} Bᵀ P_{⊥X[t−1]} x⁽ᵗ⁾`,
//!
//! where `X[t]` and `W[t]` span the first `t` iterates and squared
//! correlation vectors.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, norm, OrthoBasis};
use crate::power::IterationTrace;
use crate::power::{quadratic_progress, ProgressCheck};
use crate::tensor::{FactoredTensor3, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisRecord {
    /// One-based step index; step 1 is the initialization.
    pub step: usize,
    pub proj_x_norm: f64,
    /// `‖P_{X[t−1]} x⁽ᵗ⁾‖`.
    pub proj_x_parallel: f64,
    pub proj_w_norm: Option<f64>,
    pub proj_w_inf: Option<f64>,
    pub progress: f64,
    pub progress_perp: f64,
    pub u_norm: Option<f64>,
    pub v_norm: f64,
    /// `‖v⁽ᵗ⁻¹⁾‖`.
    pub v_prev_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub d: usize,
    pub k: usize,
    pub component: usize,
    pub records: Vec<HypothesisRecord>,
    /// Quadratic-progress check recomputed from the raw iterates.
    pub progress_check: ProgressCheck,
    /// Largest `|proj_x² + parallel² − 1|` over the trace.
    pub projection_identity_error: f64,
}

/// Computes the monitored quantities from a [`TraceLevel::Full`] trace.
///
/// [`TraceLevel::Full`]: crate::power::TraceLevel::Full
pub fn monitor_hypotheses(
    trace: &IterationTrace,
    ground_truth: &FactoredTensor3,
    component: usize,
) -> Result<HypothesisReport> {
    let (d, k) = (ground_truth.dim(), ground_truth.rank());
    if component >= k {
        return Err(Error::InvalidArgument(format!("component {component} out of range for rank {k}")));
    }
    if !ground_truth.is_symmetric() {
        return Err(Error::InvalidArgument("hypothesis monitors need a symmetric factored tensor".into()));
    }
    let xs = trace
        .iterates()
        .filter(|xs| !xs.is_empty())
        .ok_or_else(|| Error::InvalidArgument("trace lacks recorded iterates; record at full trace level".into()))?;
    let a_all = ground_truth.components();
    let target = a_all.column(component).to_owned();
    let keep: Vec<usize> = (0..k).filter(|&j| j != component).collect();
    let b: Array2<f64> = a_all.select(Axis(1), &keep);

    let mut x_basis = OrthoBasis::new(d);
    let mut w_basis = OrthoBasis::new(k - 1);
    let mut records = Vec::with_capacity(xs.len());
    let mut w_prev: Option<Array1<f64>> = None;
    let mut v_prev: Option<f64> = None;
    let mut identity_err: f64 = 0.0;
    let mut correlations = Vec::with_capacity(xs.len());
    for (s, x) in xs.iter().enumerate() {
        crate::error::check_len(d, x.len())?;
        let x_perp = x_basis.project_out(x.view());
        let proj_x_norm = norm(x_perp.view());
        let proj_x_parallel = norm(x_basis.project_onto(x.view()).view());
        identity_err = identity_err.max((proj_x_norm.powi(2) + proj_x_parallel.powi(2) - norm(x.view()).powi(2)).abs());
        let progress = target.dot(*x).abs();
        let progress_perp = target.dot(&x_perp);
        correlations.push(progress);

        let (mut proj_w_norm, mut proj_w_inf, mut u_norm) = (None, None, None);
        if let Some(w) = w_prev.take() {
            let pw = w_basis.project_out(w.view());
            proj_w_norm = Some(norm(pw.view()));
            proj_w_inf = Some(inf_norm(pw.view()));
            let u = x_basis.project_out(b.dot(&pw).view());
            u_norm = Some(norm(u.view()));
            w_basis.push(w.view());
        }
        let v = w_basis.project_out(b.t().dot(&x_perp).view());
        let v_norm = norm(v.view());

        records.push(HypothesisRecord {
            step: s + 1,
            proj_x_norm,
            proj_x_parallel,
            proj_w_norm,
            proj_w_inf,
            progress,
            progress_perp,
            u_norm,
            v_norm,
            v_prev_norm: v_prev,
        });
        v_prev = Some(v_norm);
        x_basis.push(x.view());
        w_prev = Some(b.t().dot(*x).mapv(|y| y * y));
    }
    Ok(HypothesisReport {
        d,
        k,
        component,
        records,
        progress_check: quadratic_progress(&correlations, d, k),
        projection_identity_error: identity_err,
    })
}

/// Fitted constants `C` such that each rescaled quantity stays below
/// `C·ln d` across the fitted reports.
///
/// Rescalings: `proj_w·d/√k`, `proj_w_inf·d`, `u·d/√k`, `v·√(d/k)`,
/// `progress_perp·d/√k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub d: usize,
    pub k: usize,
    pub seeds: usize,
    pub proj_w: f64,
    pub proj_w_inf: f64,
    pub u: f64,
    pub v: f64,
    pub progress_perp: f64,
}

fn scaled_maxima(report: &HypothesisReport) -> [f64; 5] {
    let d = report.d as f64;
    let sk = (report.k as f64).sqrt();
    let mut m = [0.0f64; 5];
    for r in &report.records {
        if let Some(p) = r.proj_w_norm {
            m[0] = m[0].max(p * d / sk);
        }
        if let Some(p) = r.proj_w_inf {
            m[1] = m[1].max(p * d);
        }
        if let Some(u) = r.u_norm {
            m[2] = m[2].max(u * d / sk);
        }
        m[3] = m[3].max(r.v_norm * (d.sqrt() / sk));
        m[4] = m[4].max(r.progress_perp.abs() * d / sk);
    }
    m
}

pub fn fit_envelopes(reports: &[HypothesisReport]) -> Result<EnvelopeFit> {
    let first = reports.first().ok_or_else(|| Error::InvalidArgument("no reports to fit".into()))?;
    if reports.iter().any(|r| r.d != first.d || r.k != first.k) {
        return Err(Error::InvalidArgument("envelope fit needs reports of one (d, k)".into()));
    }
    let log_d = (first.d.max(2) as f64).ln();
    let mut m = [0.0f64; 5];
    for r in reports {
        for (acc, v) in m.iter_mut().zip(scaled_maxima(r)) {
            *acc = acc.max(v);
        }
    }
    Ok(EnvelopeFit {
        d: first.d,
        k: first.k,
        seeds: reports.len(),
        proj_w: m[0] / log_d,
        proj_w_inf: m[1] / log_d,
        u: m[2] / log_d,
        v: m[3] / log_d,
        progress_perp: m[4] / log_d,
    })
}

impl EnvelopeFit {
    /// Whether `report` stays within `slack` times the fitted envelopes.
    pub fn contains(&self, report: &HypothesisReport, slack: f64) -> bool {
        let log_d = (self.d.max(2) as f64).ln();
        let limits = [self.proj_w, self.proj_w_inf, self.u, self.v, self.progress_perp];
        scaled_maxima(report).iter().zip(limits).all(|(v, c)| *v <= slack * c * log_d)
    }
}
