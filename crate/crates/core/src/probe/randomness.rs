//! Monte Carlo checks of two probabilistic bounds used in the analysis:
//! a lower bound on the part of a squared Gaussian vector that survives a
//! low-dimensional projection, and an upper bound on the mixed-norm
//! contraction `T'(u, v, I) = B diag(Bᵀu) Bᵀ v`.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm, spectral_norm, OrthoBasis};
use crate::rng;

use super::{star_norm, REPORT_ROW_CAP};

/// Required fraction of trials in which the fresh-randomness bound holds.
pub const FRESH_PASS_FRACTION: f64 = 0.99;
/// Multiple of `ln d` allowed for `max ‖T'(u,v,I)‖ / √(k/d)`.
pub const MIXED_NORM_LOG_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetKind {
    Zero,
    /// Dense Gaussian offset with `N(0, 1)` entries.
    Dense,
    /// A single coordinate of size `√k`.
    Spiky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceKind {
    /// `R'` independent of `R`.
    Independent,
    /// `R' = R`.
    Same,
    /// `R'` contains the spike coordinate (random otherwise).
    ContainsSpike,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreshVariant {
    pub offset: OffsetKind,
    pub subspace: SubspaceKind,
    pub trials: usize,
    pub holds_fraction: f64,
    /// Smallest `‖P_{⊥R'} w‖ / bound` observed.
    pub min_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreshRandomnessReport {
    pub d: usize,
    pub k: usize,
    pub t: usize,
    /// `E‖z‖² / (40√k)` with `E‖z‖² = k − t`.
    pub bound: f64,
    /// Whether `t ≤ k / (16 log₂² k)`; the check runs either way.
    pub precondition_met: bool,
    pub required_fraction: f64,
    pub variants: Vec<FreshVariant>,
    pub passed: bool,
    /// `‖P_{⊥R'} w‖ / bound` per trial, variants concatenated, capped.
    pub trial_ratios: Vec<f64>,
}

fn random_subspace<R: Rng + ?Sized>(rng: &mut R, k: usize, t: usize, seed_vectors: &[Array1<f64>]) -> OrthoBasis {
    let mut basis = OrthoBasis::new(k);
    for v in seed_vectors {
        basis.push(v.view());
    }
    while basis.rank() < t {
        basis.push(rng::gaussian_vec(rng, k, 1.0).view());
    }
    basis
}

/// Draws `t`-dimensional subspaces `R`, `R'` of `ℝᵏ`, `z = P_{⊥R} g` with
/// `g ~ N(0, I)`, and `w = (p + z)^{*2}` for each offset and subspace
/// variant, then checks `‖P_{⊥R'} w‖ ≥ (k − t)/(40√k)` in at least 99% of
/// trials. `d` only labels the report.
pub fn check_fresh_randomness(d: usize, k: usize, t: usize, trials: usize, seed: u64) -> Result<FreshRandomnessReport> {
    if k < 2 || t >= k {
        return Err(Error::InvalidArgument(format!("need k ≥ 2 and t < k, got k={k}, t={t}")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let kf = k as f64;
    let bound = (kf - t as f64) / (40.0 * kf.sqrt());
    let precondition_met = (t as f64) <= kf / (16.0 * kf.log2().powi(2));
    let variants = [
        (OffsetKind::Zero, SubspaceKind::Independent),
        (OffsetKind::Zero, SubspaceKind::Same),
        (OffsetKind::Dense, SubspaceKind::Independent),
        (OffsetKind::Dense, SubspaceKind::Same),
        (OffsetKind::Spiky, SubspaceKind::Independent),
        (OffsetKind::Spiky, SubspaceKind::ContainsSpike),
    ];
    let mut out = Vec::new();
    let mut all_ratios = Vec::new();
    for (vi, &(offset, subspace)) in variants.iter().enumerate() {
        let ratios: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut r = rng::stream(rng::child_seed(seed, vi as u64), trial as u64);
                let spike = r.random_range(0..k);
                let mut e = Array1::zeros(k);
                e[spike] = 1.0;
                let rr = random_subspace(&mut r, k, t, &[]);
                let rp = match subspace {
                    SubspaceKind::Same => rr.clone(),
                    SubspaceKind::Independent => random_subspace(&mut r, k, t, &[]),
                    SubspaceKind::ContainsSpike => {
                        random_subspace(&mut r, k, t, if t > 0 { std::slice::from_ref(&e) } else { &[] })
                    }
                };
                let z = rr.project_out(rng::gaussian_vec(&mut r, k, 1.0).view());
                let p = match offset {
                    OffsetKind::Zero => Array1::zeros(k),
                    OffsetKind::Dense => rng::gaussian_vec(&mut r, k, 1.0),
                    OffsetKind::Spiky => e * kf.sqrt(),
                };
                let w = (&p + &z).mapv(|v| v * v);
                norm(rp.project_out(w.view()).view()) / bound
            })
            .collect();
        let holds = ratios.iter().filter(|&&x| x >= 1.0).count() as f64 / trials as f64;
        let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(FreshVariant {
            offset,
            subspace,
            trials,
            holds_fraction: holds,
            min_ratio,
            passed: holds >= FRESH_PASS_FRACTION,
        });
        all_ratios.extend(ratios);
    }
    all_ratios.truncate(REPORT_ROW_CAP);
    Ok(FreshRandomnessReport {
        d,
        k,
        t,
        bound,
        precondition_met,
        required_fraction: FRESH_PASS_FRACTION,
        passed: out.iter().all(|v| v.passed),
        variants: out,
        trial_ratios: all_ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeDirection {
    Gaussian,
    /// Gaussian projected away from the first `d/2` columns of `B`.
    Projected,
    /// A single column of `B`.
    Aligned,
    /// `B s` for random signs `s`.
    SignCombination,
}

const DIRECTIONS: [ProbeDirection; 4] =
    [ProbeDirection::Gaussian, ProbeDirection::Projected, ProbeDirection::Aligned, ProbeDirection::SignCombination];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedNormTrial {
    pub direction: ProbeDirection,
    /// `max_{‖v‖=1} ‖T'(u,v,I)‖ / √(k/d)` at `‖u‖_{B*} = 1`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedNormReport {
    pub d: usize,
    pub k: usize,
    pub trials: usize,
    pub max_ratio: f64,
    /// `max_ratio / ln d`.
    pub fitted_c: f64,
    /// `10·ln d`.
    pub threshold: f64,
    pub passed: bool,
    pub per_trial: Vec<MixedNormTrial>,
}

/// Matrix `B diag(Bᵀu) Bᵀ`, so that `T'(u, v, I) = M v`.
pub fn mixed_contraction_matrix(b: &Array2<f64>, u: &Array1<f64>) -> Array2<f64> {
    let c = b.t().dot(u);
    let scaled = b * &c.view().insert_axis(Axis(0));
    scaled.dot(&b.t())
}

/// For random `B` with `N(0, 1/d)` entries and unit-star-norm probes `u`,
/// measures the worst unit `v` (top singular direction of the contraction
/// matrix) and checks `max ‖T'(u,v,I)‖ ≤ 10·ln d·√(k/d)`.
pub fn check_mixed_norm_bound(d: usize, k: usize, trials: usize, seed: u64) -> Result<MixedNormReport> {
    if k <= d {
        return Err(Error::InvalidArgument(format!("mixed-norm check needs k > d, got d={d}, k={k}")));
    }
    if d < 2 || trials == 0 {
        return Err(Error::InvalidArgument("need d ≥ 2 and at least one trial".into()));
    }
    let scale = (k as f64 / d as f64).sqrt();
    let per_trial: Vec<MixedNormTrial> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<MixedNormTrial> {
            let mut r = rng::stream(seed, trial as u64);
            let b = rng::gaussian_matrix(&mut r, d, k, 1.0 / (d as f64).sqrt());
            let direction = DIRECTIONS[trial % DIRECTIONS.len()];
            let u = match direction {
                ProbeDirection::Gaussian => rng::gaussian_vec(&mut r, d, 1.0),
                ProbeDirection::Projected => {
                    let mut basis = OrthoBasis::new(d);
                    for j in 0..d / 2 {
                        basis.push(b.column(j));
                    }
                    basis.project_out(rng::gaussian_vec(&mut r, d, 1.0).view())
                }
                ProbeDirection::Aligned => b.column(r.random_range(0..k)).to_owned(),
                ProbeDirection::SignCombination => {
                    let s: Array1<f64> = (0..k).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
                    b.dot(&s)
                }
            };
            let sn = star_norm(b.view(), u.view())?;
            if !(sn > 0.0) {
                return Err(Error::DegenerateIterate { step: trial, norm: sn });
            }
            let u = u / sn;
            let m = mixed_contraction_matrix(&b, &u);
            Ok(MixedNormTrial { direction, ratio: spectral_norm(m.view()) / scale })
        })
        .collect::<Result<_>>()?;
    let max_ratio = per_trial.iter().map(|t| t.ratio).fold(0.0, f64::max);
    let log_d = (d as f64).ln();
    let threshold = MIXED_NORM_LOG_FACTOR * log_d;
    let mut rows = per_trial;
    rows.truncate(REPORT_ROW_CAP);
    Ok(MixedNormReport {
        d,
        k,
        trials,
        max_ratio,
        fitted_c: max_ratio / log_d,
        threshold,
        passed: max_ratio <= threshold,
        per_trial: rows,
    })
}
