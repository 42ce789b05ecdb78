use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::tensor::{FactoredTensor3, Tensor3};

/// Above this size matching falls back to the greedy assignment.
pub const OPTIMAL_ASSIGNMENT_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assignment {
    Optimal,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    /// `‖Â − A‖_F` over matched pairs after sign correction.
    pub frobenius_error: f64,
    /// Per truth column: `|⟨x̂, a_j⟩|` of its matched estimate.
    pub per_component_correlations: Vec<Option<f64>>,
    /// Per estimate: the truth column it was matched to.
    pub permutation: Vec<Option<usize>>,
    /// Per estimate: the sign applied before comparing (`±1`, `0` if unmatched).
    pub signs: Vec<f64>,
    /// Truth columns without a matched estimate.
    pub missed: Vec<usize>,
    pub assignment: Assignment,
}

impl MatchReport {
    /// Truth columns matched with correlation at least `threshold`.
    pub fn recovered(&self, threshold: f64) -> usize {
        self.per_component_correlations.iter().filter(|c| c.is_some_and(|c| c >= threshold)).count()
    }

    pub fn matched_pairs(&self) -> usize {
        self.permutation.iter().filter(|p| p.is_some()).count()
    }
}

/// Maximum-weight assignment of rows to columns (Hungarian algorithm with
/// potentials, `O(n²m)`). Returns the column of each row; with more rows
/// than columns some rows stay unassigned.
pub fn hungarian_max(score: ArrayView2<f64>) -> Vec<Option<usize>> {
    let (rows, cols) = score.dim();
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let by_col = hungarian_max(score.t());
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        return out;
    }
    let (n, m) = (rows, cols);
    let cost = |i: usize, j: usize| -score[[i - 1, j - 1]];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Greedy assignment: repeatedly takes the largest remaining score.
/// Ties go to the lowest (row, column).
pub fn greedy_max(score: ArrayView2<f64>) -> Vec<Option<usize>> {
    let (rows, cols) = score.dim();
    let mut pairs: Vec<(usize, usize)> = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect();
    pairs.sort_by(|a, b| score[[b.0, b.1]].total_cmp(&score[[a.0, a.1]]).then(a.cmp(b)));
    let mut out = vec![None; rows];
    let mut col_used = vec![false; cols];
    let mut left = rows.min(cols);
    for (i, j) in pairs {
        if left == 0 {
            break;
        }
        if out[i].is_none() && !col_used[j] {
            out[i] = Some(j);
            col_used[j] = true;
            left -= 1;
        }
    }
    out
}

/// Matches estimate columns to truth columns maximizing `Σ |⟨x̂_i, a_π(i)⟩|`,
/// optimally when both counts are at most [`OPTIMAL_ASSIGNMENT_LIMIT`] and
/// greedily otherwise.
pub fn match_and_score(estimates: ArrayView2<f64>, truth: &FactoredTensor3) -> Result<MatchReport> {
    if estimates.ncols() == 0 {
        return Err(Error::InvalidArgument("no estimates to match".into()));
    }
    check_len(truth.dim(), estimates.nrows())?;
    let a = truth.components();
    let corr: Array2<f64> = estimates.t().dot(a);
    let score = corr.mapv(f64::abs);
    let (m, k) = score.dim();
    let (permutation, assignment) = if m.max(k) <= OPTIMAL_ASSIGNMENT_LIMIT {
        (hungarian_max(score.view()), Assignment::Optimal)
    } else {
        (greedy_max(score.view()), Assignment::Greedy)
    };
    let mut per_component = vec![None; k];
    let mut signs = vec![0.0; m];
    let mut sq = 0.0;
    for (i, p) in permutation.iter().enumerate() {
        if let Some(j) = *p {
            let s = if corr[[i, j]] < 0.0 { -1.0 } else { 1.0 };
            signs[i] = s;
            per_component[j] = Some(score[[i, j]]);
            sq += estimates.column(i).iter().zip(a.column(j)).map(|(x, y)| (s * x - y).powi(2)).sum::<f64>();
        }
    }
    let missed = (0..k).filter(|&j| per_component[j].is_none()).collect();
    Ok(MatchReport {
        frobenius_error: sq.sqrt(),
        per_component_correlations: per_component,
        permutation,
        signs,
        missed,
        assignment,
    })
}
