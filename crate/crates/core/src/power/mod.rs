//! Tensor power iteration `x ← T(I,x,x) / ‖T(I,x,x)‖`.
//!
//! [`run_power`] is the symmetric engine, [`run_power_asymmetric`] the
//! per-mode variant for `Σ λ_j a_j ⊗ b_j ⊗ c_j`, and
//! [`run_power_with_shadow`] runs on `T + E` while tracking how far the
//! noisy iterate drifts from a noiseless shadow.

mod progress;
mod trace;

pub use progress::{implied_beta, quadratic_progress, ProgressCheck};
pub use trace::{IterationTrace, StepRecord, StopReason, TraceLevel};

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::norm;
use crate::tensor::{FactoredTensor3, Mode, PerturbedTensor, Tensor3};

const UNIT_TOL: f64 = 1e-8;
const DEGENERATE_NORM: f64 = 1e-300;
const FIXED_POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    /// Step budget; `None` uses [`default_iterations`] for the tensor's dimension.
    pub max_iters: Option<usize>,
    pub convergence_gamma: f64,
    pub trace_level: TraceLevel,
    /// Ground-truth column whose correlation is tracked and used for early stopping.
    pub track_target: Option<usize>,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { max_iters: None, convergence_gamma: 0.05, trace_level: TraceLevel::Norms, track_target: None }
    }
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.convergence_gamma > 0.0 && self.convergence_gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("convergence_gamma {} not in (0, 1)", self.convergence_gamma)));
        }
        if self.max_iters == Some(0) {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn iterations_for(&self, d: usize) -> usize {
        self.max_iters.unwrap_or_else(|| default_iterations(d))
    }
}

/// Unit vector with correlation exactly `c` to the unit vector `a`, the
/// rest pointing in a uniformly random direction orthogonal to `a`.
pub fn correlated_start<R: rand::Rng + ?Sized>(rng: &mut R, a: ArrayView1<f64>, c: f64) -> Result<Array1<f64>> {
    if !(c.abs() <= 1.0) {
        return Err(Error::InvalidArgument(format!("correlation {c} not in [-1, 1]")));
    }
    if (norm(a) - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidArgument("target direction must be a unit vector".into()));
    }
    let g = crate::rng::gaussian_vec(rng, a.len(), 1.0);
    let perp = &g - &(&a * g.dot(&a));
    if norm(perp.view()) <= 1e-8 * norm(g.view()) {
        return Err(Error::DegenerateIterate { step: 0, norm: norm(perp.view()) });
    }
    let perp = crate::linalg::normalize(perp)?;
    Ok(&a * c + &(perp * (1.0 - c * c).sqrt()))
}

/// `ceil(4 log₂ log₂ max(d, 4)) + 10`.
pub fn default_iterations(d: usize) -> usize {
    let d = d.max(4) as f64;
    (4.0 * d.log2().log2()).ceil() as usize + 10
}

fn check_unit(x: ArrayView1<f64>) -> Result<()> {
    let n = norm(x);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidArgument(format!("start vector has norm {n}, expected 1")));
    }
    Ok(())
}

/// One power step. Returns the renormalized iterate and `‖T(I,x,x)‖`.
pub fn power_step<T: Tensor3 + ?Sized>(tensor: &T, x: ArrayView1<f64>) -> Result<(Array1<f64>, f64)> {
    check_len(tensor.dim(), x.len())?;
    check_unit(x)?;
    normalized_contraction(tensor, Mode::First, x, x, 0)
}

fn normalized_contraction<T: Tensor3 + ?Sized>(
    tensor: &T,
    free: Mode,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    step: usize,
) -> Result<(Array1<f64>, f64)> {
    let u = tensor.contract_mode(free, p, q)?;
    let n = norm(u.view());
    if !(n >= DEGENERATE_NORM) {
        return Err(Error::DegenerateIterate { step, norm: n });
    }
    Ok((u / n, n))
}

fn is_fixed(next: &Array1<f64>, prev: &Array1<f64>) -> bool {
    let minus = norm((next - prev).view());
    let plus = norm((next + prev).view());
    minus.min(plus) < FIXED_POINT_TOL
}

/// Builds step records for one mode of a run.
struct Recorder<'a> {
    level: TraceLevel,
    factor: Option<ArrayView2<'a, f64>>,
    target: Option<usize>,
    steps: Vec<StepRecord>,
}

impl<'a> Recorder<'a> {
    fn new(config: &PowerConfig, ground_truth: Option<&'a FactoredTensor3>, mode: Mode, d: usize) -> Result<Self> {
        if let Some(gt) = ground_truth {
            check_len(d, gt.dim())?;
            if let Some(j) = config.track_target {
                if j >= gt.rank() {
                    return Err(Error::InvalidArgument(format!(
                        "track_target {j} out of range for rank {}",
                        gt.rank()
                    )));
                }
            }
        }
        Ok(Self {
            level: config.trace_level,
            factor: ground_truth.map(|gt| gt.mode_components(mode).view()),
            target: config.track_target.filter(|_| ground_truth.is_some()),
            steps: Vec::new(),
        })
    }

    fn correlation(&self, x: &Array1<f64>) -> Option<f64> {
        match (self.factor, self.target) {
            (Some(a), Some(j)) => Some(a.column(j).dot(x)),
            _ => None,
        }
    }

    fn record(&mut self, iteration: usize, x: &Array1<f64>, unnorm: Option<f64>, noise: Option<f64>) {
        if self.level == TraceLevel::None {
            return;
        }
        let full = self.level == TraceLevel::Full;
        let y = if full { self.factor.map(|a| a.t().dot(x)) } else { None };
        let w = match (&y, self.target) {
            (Some(y), Some(j)) => {
                Some(y.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, v)| v * v).collect::<Array1<f64>>())
            }
            _ => None,
        };
        self.steps.push(StepRecord {
            iteration,
            x: full.then(|| x.clone()),
            y,
            w,
            unnormalized_norm: unnorm,
            target_correlation: self.correlation(x),
            noise_component_norm: noise,
        });
    }

    fn finish(self, x: Array1<f64>, iterations: usize, stop_reason: StopReason) -> IterationTrace {
        IterationTrace {
            final_correlation: self.correlation(&x),
            steps: self.steps,
            final_x: x,
            iterations,
            stop_reason,
            level: self.level,
        }
    }
}

/// Symmetric power iteration from `x0`.
///
/// Stops after the step budget, when the tracked correlation reaches
/// `1 − γ` in absolute value, or when consecutive iterates agree up to sign
/// within `1e-12`.
pub fn run_power<T: Tensor3 + ?Sized>(
    tensor: &T,
    x0: ArrayView1<f64>,
    config: &PowerConfig,
    ground_truth: Option<&FactoredTensor3>,
) -> Result<IterationTrace> {
    config.validate()?;
    let d = tensor.dim();
    check_len(d, x0.len())?;
    check_unit(x0)?;
    let mut rec = Recorder::new(config, ground_truth, Mode::First, d)?;
    let mut x = x0.to_owned();
    rec.record(0, &x, None, None);
    let n_iters = config.iterations_for(d);
    for t in 1..=n_iters {
        let (next, n) = normalized_contraction(tensor, Mode::First, x.view(), x.view(), t)?;
        rec.record(t, &next, Some(n), None);
        let reached = rec.correlation(&next).is_some_and(|c| c.abs() >= 1.0 - config.convergence_gamma);
        let fixed = is_fixed(&next, &x);
        x = next;
        if reached {
            return Ok(rec.finish(x, t, StopReason::TargetReached));
        }
        if fixed {
            return Ok(rec.finish(x, t, StopReason::FixedPoint));
        }
    }
    Ok(rec.finish(x, n_iters, StopReason::MaxIters))
}

/// Alternating per-mode iteration on an asymmetric tensor.
///
/// All three modes update simultaneously from the previous sweep:
/// `x₁ ← T(I,x₂,x₃)`, `x₂ ← T(x₁,I,x₃)`, `x₃ ← T(x₁,x₂,I)`, each
/// renormalized. With `A = B = C` and identical starts every mode
/// reproduces the symmetric iterates. Early stopping requires all three
/// modes to meet the criterion.
pub fn run_power_asymmetric<T: Tensor3 + ?Sized>(
    tensor: &T,
    starts: [ArrayView1<f64>; 3],
    config: &PowerConfig,
    ground_truth: Option<&FactoredTensor3>,
) -> Result<[IterationTrace; 3]> {
    config.validate()?;
    let d = tensor.dim();
    for s in &starts {
        check_len(d, s.len())?;
        check_unit(*s)?;
    }
    let mut recs = [
        Recorder::new(config, ground_truth, Mode::First, d)?,
        Recorder::new(config, ground_truth, Mode::Second, d)?,
        Recorder::new(config, ground_truth, Mode::Third, d)?,
    ];
    let mut xs: [Array1<f64>; 3] = starts.map(|s| s.to_owned());
    for (rec, x) in recs.iter_mut().zip(&xs) {
        rec.record(0, x, None, None);
    }
    let n_iters = config.iterations_for(d);
    let finish = |recs: [Recorder; 3], xs: [Array1<f64>; 3], t, reason| {
        let [r0, r1, r2] = recs;
        let [x0, x1, x2] = xs;
        [r0.finish(x0, t, reason), r1.finish(x1, t, reason), r2.finish(x2, t, reason)]
    };
    for t in 1..=n_iters {
        let (n0, s0) = normalized_contraction(tensor, Mode::First, xs[1].view(), xs[2].view(), t)?;
        let (n1, s1) = normalized_contraction(tensor, Mode::Second, xs[0].view(), xs[2].view(), t)?;
        let (n2, s2) = normalized_contraction(tensor, Mode::Third, xs[0].view(), xs[1].view(), t)?;
        let next = [n0, n1, n2];
        let norms = [s0, s1, s2];
        let mut reached = true;
        let mut fixed = true;
        for m in 0..3 {
            recs[m].record(t, &next[m], Some(norms[m]), None);
            reached &= recs[m].correlation(&next[m]).is_some_and(|c| c.abs() >= 1.0 - config.convergence_gamma);
            fixed &= is_fixed(&next[m], &xs[m]);
        }
        xs = next;
        if reached {
            return Ok(finish(recs, xs, t, StopReason::TargetReached));
        }
        if fixed {
            return Ok(finish(recs, xs, t, StopReason::FixedPoint));
        }
    }
    Ok(finish(recs, xs, n_iters, StopReason::MaxIters))
}

/// Power iteration on `T̂ = T + E` with a noiseless shadow.
///
/// The noisy iterate is `x̂⁽ᵗ⁺¹⁾ = T̂(I,x̂,x̂)/N` with `N = ‖T̂(I,x̂,x̂)‖`.
/// The shadow starts at `x⁽⁰⁾ = x̂⁽⁰⁾` and evolves as
/// `x⁽ᵗ⁺¹⁾ = T(I,x⁽ᵗ⁾,x⁽ᵗ⁾)/N`, sharing the noisy normalizer, so that
/// `ξ = x̂ − x` collects every term of the expanded update that involves
/// `E` or an earlier `ξ`. The recorded iterate is `x̂` and the recorded
/// noise norm is `‖ξ‖`. Stopping rules act on `x̂`.
pub fn run_power_with_shadow(
    perturbed: &PerturbedTensor,
    x0: ArrayView1<f64>,
    config: &PowerConfig,
    ground_truth: Option<&FactoredTensor3>,
) -> Result<IterationTrace> {
    config.validate()?;
    let d = perturbed.dim();
    check_len(d, x0.len())?;
    check_unit(x0)?;
    let signal = perturbed.signal();
    let mut rec = Recorder::new(config, ground_truth, Mode::First, d)?;
    let mut x_hat = x0.to_owned();
    let mut shadow = x0.to_owned();
    rec.record(0, &x_hat, None, Some(0.0));
    let n_iters = config.iterations_for(d);
    for t in 1..=n_iters {
        let (next, n) = normalized_contraction(perturbed, Mode::First, x_hat.view(), x_hat.view(), t)?;
        shadow = signal.contract_1(shadow.view(), shadow.view())? / n;
        let xi = norm((&next - &shadow).view());
        rec.record(t, &next, Some(n), Some(xi));
        let reached = rec.correlation(&next).is_some_and(|c| c.abs() >= 1.0 - config.convergence_gamma);
        let fixed = is_fixed(&next, &x_hat);
        x_hat = next;
        if reached {
            return Ok(rec.finish(x_hat, t, StopReason::TargetReached));
        }
        if fixed {
            return Ok(rec.finish(x_hat, t, StopReason::FixedPoint));
        }
    }
    Ok(rec.finish(x_hat, n_iters, StopReason::MaxIters))
}
