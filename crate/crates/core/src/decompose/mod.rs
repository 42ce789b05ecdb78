//! Multi-start decomposition: power iteration from many starts, then
//! greedy clustering of the converged iterates into distinct components.

mod matching;

pub use matching::{greedy_max, hungarian_max, match_and_score, Assignment, MatchReport, OPTIMAL_ASSIGNMENT_LIMIT};

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{norm, psd_pinv};
use crate::lvm::{empirical_third_moment, ImplicitMomentTensor, SampleBatch};
use crate::power::{run_power, PowerConfig, TraceLevel};
use crate::tensor::{FactoredTensor3, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    /// Survivors with `|⟨x, x̂⟩| > ν/2` are removed after each emission.
    pub nu: f64,
    /// Refinement steps for a selected survivor; `None` uses the power budget.
    pub refine_iters: Option<usize>,
    pub max_components: Option<usize>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { nu: 0.5, refine_iters: None, max_components: None }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidArgument(format!("nu {} not in (0, 1]", self.nu)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateDiagnostics {
    /// Index of the start whose iterate was selected.
    pub source_init: usize,
    /// `|T(x,x,x)|` of the selected iterate before refinement.
    pub selection_score: f64,
    /// `|T(x,x,x)|` at each refinement step, starting with the selected iterate.
    pub refine_scores: Vec<f64>,
    pub refine_iterations: usize,
    /// Power steps the selected start took in the multi-start phase.
    pub run_iterations: usize,
    /// `‖T(I,x̂,x̂) − ‖T(I,x̂,x̂)‖ x̂‖ / ‖T(I,x̂,x̂)‖`.
    pub fixed_point_residual: f64,
}

impl EstimateDiagnostics {
    /// Whether refinement never lowered the score by more than `tol`.
    pub fn refinement_monotone(&self, tol: f64) -> bool {
        self.refine_scores.windows(2).all(|w| w[1] >= w[0] - tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionResult {
    /// `d × m` unit columns, sign-normalized so `T(x̂,x̂,x̂) ≥ 0`.
    #[serde(skip)]
    pub estimates: Array2<f64>,
    /// `T(x̂,x̂,x̂)` per estimate.
    pub weights: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    pub diagnostics: Vec<EstimateDiagnostics>,
    /// Starts whose iteration hit a zero contraction; skipped.
    pub degenerate_inits: usize,
    /// Refined estimates that landed within `ν/2` of an earlier emission; dropped.
    pub dropped_duplicates: usize,
}

impl DecompositionResult {
    pub fn len(&self) -> usize {
        self.estimates.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest `|⟨x̂_i, x̂_j⟩|` over distinct pairs.
    pub fn max_pairwise_correlation(&self) -> f64 {
        let g = self.estimates.t().dot(&self.estimates);
        let mut m: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..i {
                m = m.max(g[[i, j]].abs());
            }
        }
        m
    }

    /// As a factored tensor with the estimated weights.
    pub fn to_tensor(&self) -> Result<FactoredTensor3> {
        FactoredTensor3::new(self.estimates.clone(), Array1::from(self.weights.clone()))
    }
}

/// `T(x̂, x̂, x̂)`.
pub fn estimate_weight<T: Tensor3 + ?Sized>(tensor: &T, x: ArrayView1<f64>) -> Result<f64> {
    tensor.cubic_form(x)
}

/// Least-squares weights `argmin_w ‖T − Σ w_i x̂_i^{⊗3}‖_F`, from the
/// normal equations `G w = b` with `G_ij = ⟨x̂_i, x̂_j⟩³` and `b_i = T(x̂_i, x̂_i, x̂_i)`.
pub fn refit_weights<T: Tensor3 + ?Sized>(tensor: &T, estimates: ArrayView2<f64>) -> Result<Array1<f64>> {
    check_len(tensor.dim(), estimates.nrows())?;
    let m = estimates.ncols();
    let gram = estimates.t().dot(&estimates);
    let g = DMatrix::from_fn(m, m, |i, j| gram[[i, j]].powi(3));
    let b = DVector::from_iterator(
        m,
        estimates.columns().into_iter().map(|x| tensor.cubic_form(x)).collect::<Result<Vec<_>>>()?,
    );
    let w = psd_pinv(&g) * b;
    Ok(Array1::from_iter(w.iter().copied()))
}

fn residual(tensor: &(impl Tensor3 + ?Sized), x: &Array1<f64>) -> Result<f64> {
    let u = tensor.contract_1(x.view(), x.view())?;
    let n = norm(u.view());
    if n == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(norm((&u - &(n * x)).view()) / n)
}

/// Refinement: plain power steps, stopping early at a fixed point.
fn refine(tensor: &(impl Tensor3 + ?Sized), x: &Array1<f64>, iters: usize) -> Result<(Array1<f64>, Vec<f64>, usize)> {
    let mut x = x.clone();
    let mut scores = vec![tensor.cubic_form(x.view())?.abs()];
    let mut steps = 0;
    for _ in 0..iters {
        let u = tensor.contract_1(x.view(), x.view())?;
        let n = norm(u.view());
        if !(n >= 1e-300) {
            return Err(Error::DegenerateIterate { step: steps + 1, norm: n });
        }
        let next = u / n;
        steps += 1;
        scores.push(tensor.cubic_form(next.view())?.abs());
        let moved = norm((&next - &x).view()).min(norm((&next + &x).view()));
        x = next;
        if moved < 1e-12 {
            break;
        }
    }
    Ok((x, scores, steps))
}

/// Runs power iteration from every start, then repeatedly emits the
/// best-scoring survivor (by `|T(x,x,x)|`, lowest index on ties) after
/// refinement and removes every survivor with `|⟨x, x̂⟩| > ν/2`.
///
/// Starts that hit a zero contraction are skipped and counted. A refined
/// estimate within `ν/2` of an earlier one is dropped and counted.
pub fn decompose<T: Tensor3 + ?Sized>(
    tensor: &T,
    inits: &[Array1<f64>],
    power_config: &PowerConfig,
    cluster_config: &ClusterConfig,
) -> Result<DecompositionResult> {
    if inits.is_empty() {
        return Err(Error::InvalidArgument("decompose needs at least one start".into()));
    }
    power_config.validate()?;
    cluster_config.validate()?;
    let d = tensor.dim();
    let run_cfg = PowerConfig { trace_level: TraceLevel::None, track_target: None, ..power_config.clone() };
    type Run = Result<Option<(Array1<f64>, usize)>>;
    let runs: Vec<Run> = inits
        .par_iter()
        .map(|x0| match run_power(tensor, x0.view(), &run_cfg, None) {
            Ok(trace) => Ok(Some((trace.final_x, trace.iterations))),
            Err(Error::DegenerateIterate { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();

    struct Survivor {
        init: usize,
        x: Array1<f64>,
        score: f64,
        iterations: usize,
    }
    let mut pool = Vec::with_capacity(inits.len());
    let mut degenerate_inits = 0;
    for (init, run) in runs.into_iter().enumerate() {
        match run? {
            Some((x, iterations)) => {
                let score = tensor.cubic_form(x.view())?.abs();
                pool.push(Survivor { init, x, score, iterations });
            }
            None => degenerate_inits += 1,
        }
    }

    let half_nu = cluster_config.nu / 2.0;
    let refine_iters = cluster_config.refine_iters.unwrap_or_else(|| power_config.iterations_for(d));
    let cap = cluster_config.max_components.unwrap_or(usize::MAX);
    let mut emitted: Vec<Array1<f64>> = Vec::new();
    let mut weights = Vec::new();
    let mut cluster_sizes = Vec::new();
    let mut diagnostics = Vec::new();
    let mut dropped_duplicates = 0;

    while !pool.is_empty() && emitted.len() < cap {
        let mut best = 0;
        for (i, s) in pool.iter().enumerate() {
            if s.score > pool[best].score {
                best = i;
            }
        }
        let chosen = pool.remove(best);
        let (mut xhat, refine_scores, refine_steps) = match refine(tensor, &chosen.x, refine_iters) {
            Ok(r) => r,
            Err(Error::DegenerateIterate { .. }) => {
                degenerate_inits += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut weight = tensor.cubic_form(xhat.view())?;
        if weight < 0.0 {
            xhat.mapv_inplace(|v| -v);
            weight = tensor.cubic_form(xhat.view())?;
        }
        let before = pool.len();
        pool.retain(|s| s.x.dot(&xhat).abs() <= half_nu);
        let cluster = before - pool.len() + 1;
        if emitted.iter().any(|e| e.dot(&xhat).abs() >= half_nu) {
            dropped_duplicates += 1;
            continue;
        }
        diagnostics.push(EstimateDiagnostics {
            source_init: chosen.init,
            selection_score: chosen.score,
            refine_iterations: refine_steps,
            run_iterations: chosen.iterations,
            fixed_point_residual: residual(tensor, &xhat)?,
            refine_scores,
        });
        emitted.push(xhat);
        weights.push(weight);
        cluster_sizes.push(cluster);
    }

    let mut estimates = Array2::zeros((d, emitted.len()));
    for (j, x) in emitted.iter().enumerate() {
        estimates.column_mut(j).assign(x);
    }
    Ok(DecompositionResult { estimates, weights, cluster_sizes, diagnostics, degenerate_inits, dropped_duplicates })
}

/// Which tensor [`learn_multiview`] decomposes.
#[derive(Debug, Clone, Copy)]
pub enum MomentSource<'a> {
    /// The population tensor, supplied by the caller.
    Exact(&'a FactoredTensor3),
    /// The dense empirical cross-view moment of the batch.
    Empirical,
    /// The empirical moment contracted directly from the samples.
    Implicit,
}

/// Decomposes a moment tensor of `batch`, starting power iteration from
/// every normalized first-view sample. Labels are never read.
pub fn learn_multiview(
    batch: &SampleBatch,
    source: MomentSource<'_>,
    power_config: &PowerConfig,
    cluster_config: &ClusterConfig,
) -> Result<DecompositionResult> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let inits = batch.normalized_first_view();
    match source {
        MomentSource::Exact(t) => {
            check_len(t.dim(), batch.dim())?;
            decompose(t, &inits, power_config, cluster_config)
        }
        MomentSource::Empirical => decompose(&empirical_third_moment(batch)?, &inits, power_config, cluster_config),
        MomentSource::Implicit => decompose(&ImplicitMomentTensor::new(batch)?, &inits, power_config, cluster_config),
    }
}

#[cfg(test)]
mod tests;
