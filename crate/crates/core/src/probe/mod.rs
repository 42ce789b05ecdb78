//! Empirical probes of the quantities that drive the convergence analysis
//! of tensor power iteration.

mod conditioning;
mod hypotheses;
mod randomness;

#[cfg(test)]
mod tests;

pub use conditioning::{
    check_conditioning_lemma, check_conditioning_lemma_with, check_iterative_conditioning, random_chain, verify_chain,
    ConditioningCheck, Constraint, ConstraintChain, GaussianConditioner, EXACT_TOL, MAX_CHAIN, MIN_TRIALS,
    VARIANCE_RATIO_BAND, Z_THRESHOLD,
};
pub use hypotheses::{fit_envelopes, monitor_hypotheses, EnvelopeFit, HypothesisRecord, HypothesisReport};
pub use randomness::{
    check_fresh_randomness, check_mixed_norm_bound, mixed_contraction_matrix, FreshRandomnessReport, FreshVariant,
    MixedNormReport, MixedNormTrial, OffsetKind, ProbeDirection, SubspaceKind, FRESH_PASS_FRACTION,
    MIXED_NORM_LOG_FACTOR,
};

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{check_len, Result};

/// Cap on raw per-trial rows embedded in serialized reports.
pub const REPORT_ROW_CAP: usize = 10_000;

/// `max_i |⟨a_i, u⟩|` over the columns of `a`.
pub fn star_norm(a: ArrayView2<f64>, u: ArrayView1<f64>) -> Result<f64> {
    check_len(a.nrows(), u.len())?;
    Ok(a.t().dot(&u).iter().fold(0.0, |m, v| m.max(v.abs())))
}
