use serde::Serialize;

/// Outcome of the quadratic-progress check on a correlation sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressCheck {
    pub passed: bool,
    /// Number of transitions `t → t+1` that were tested.
    pub checked: usize,
    /// Rescaled correlations `r_t = |c_t|·d/√k`.
    pub rescaled: Vec<f64>,
    /// First failing transition, if any.
    pub first_failure: Option<usize>,
}

pub const PROGRESS_FACTOR: f64 = 0.4;
pub const SATURATION: f64 = 0.5;

/// Checks `r_{t+1} ≥ 0.4·r_t²` for every `t` with `r_t ≤ 0.5·d/√k`, where
/// `r_t = |c_t|·d/√k`. Checking stops at the first saturated step.
pub fn quadratic_progress(correlations: &[f64], d: usize, k: usize) -> ProgressCheck {
    let scale = d as f64 / (k as f64).sqrt();
    let rescaled: Vec<f64> = correlations.iter().map(|c| c.abs() * scale).collect();
    let mut checked = 0;
    let mut first_failure = None;
    for t in 0..rescaled.len().saturating_sub(1) {
        if rescaled[t] > SATURATION * scale {
            break;
        }
        checked += 1;
        if rescaled[t + 1] < PROGRESS_FACTOR * rescaled[t] * rescaled[t] {
            first_failure = Some(t);
            break;
        }
    }
    ProgressCheck { passed: first_failure.is_none(), checked, rescaled, first_failure }
}

/// The `β` for which `|c| = d^β·√k/d`.
pub fn implied_beta(correlation: f64, d: usize, k: usize) -> f64 {
    let d = d as f64;
    (correlation.abs() * d / (k as f64).sqrt()).ln() / d.ln()
}
