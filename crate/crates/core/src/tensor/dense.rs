use ndarray::{Array1, ArrayView1};

use super::{Mode, Tensor3};
use crate::error::{check_len, Error, Result};
use crate::rng;

/// Largest `d` for which `d³` entries are materialized (`256³` f64 ≈ 134 MB).
pub const DENSE_DIM_LIMIT: usize = 256;

pub(crate) const SYMMETRY_TOL: f64 = 1e-9;

/// Explicit `d × d × d` array, row-major: entry `(i, j, l)` lives at
/// offset `i·d² + j·d + l`.
///
/// `symmetric` is a flag, not a storage scheme. It is checked when set.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    dim: usize,
    entries: Vec<f64>,
    symmetric: bool,
}

fn check_budget(d: usize) -> Result<()> {
    if d > DENSE_DIM_LIMIT {
        Err(Error::Resource(format!("dense tensor with d = {d} exceeds limit {DENSE_DIM_LIMIT}")))
    } else {
        Ok(())
    }
}

impl DenseTensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![0.0; dim * dim * dim], symmetric: true }
    }

    /// Wraps raw entries. When `symmetric` is set the entries must be
    /// invariant under all index permutations (relative tolerance 1e-9).
    pub fn from_entries(dim: usize, entries: Vec<f64>, symmetric: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        check_budget(dim)?;
        check_len(dim * dim * dim, entries.len())?;
        let t = Self { dim, entries, symmetric: false };
        if symmetric {
            t.mark_symmetric()
        } else {
            Ok(t)
        }
    }

    /// Sets the symmetric flag after verifying it.
    pub fn mark_symmetric(mut self) -> Result<Self> {
        if !self.check_symmetric(SYMMETRY_TOL) {
            return Err(Error::InvalidArgument("tensor flagged symmetric is not symmetric".into()));
        }
        self.symmetric = true;
        Ok(self)
    }

    pub(crate) fn with_symmetric_flag(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    /// Symmetrized standard Gaussian tensor (average over the six index
    /// permutations of i.i.d. `N(0,1)` entries).
    pub fn random_symmetric(dim: usize, seed: u64) -> Result<Self> {
        check_budget(dim)?;
        let mut rng = rng::seeded(seed);
        let raw = rng::gaussian_vec(&mut rng, dim * dim * dim, 1.0);
        let mut out = Self::zeros(dim);
        let d = dim;
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    let s = raw[i * d * d + j * d + l]
                        + raw[i * d * d + l * d + j]
                        + raw[j * d * d + i * d + l]
                        + raw[j * d * d + l * d + i]
                        + raw[l * d * d + i * d + j]
                        + raw[l * d * d + j * d + i];
                    out.entries[i * d * d + j * d + l] = s / 6.0;
                }
            }
        }
        Ok(out)
    }

    /// I.i.d. `N(0,1)` entries with no symmetry.
    pub fn random_gaussian(dim: usize, seed: u64) -> Result<Self> {
        check_budget(dim)?;
        let mut rng = rng::seeded(seed);
        let raw = rng::gaussian_vec(&mut rng, dim * dim * dim, 1.0);
        Ok(Self { dim, entries: raw.to_vec(), symmetric: false })
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.dim + j) * self.dim + l
    }

    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.entries[self.offset(i, j, l)]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Checks permutation symmetry regardless of the flag.
    pub fn check_symmetric(&self, rel_tol: f64) -> bool {
        let d = self.dim;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in i..d {
                for l in j..d {
                    let base = self.get(i, j, l);
                    for v in
                        [self.get(i, l, j), self.get(j, i, l), self.get(j, l, i), self.get(l, i, j), self.get(l, j, i)]
                    {
                        if (v - base).abs() > rel_tol * scale {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|x| alpha * x).collect(), symmetric: self.symmetric }
    }

    /// `self − other`; symmetric only if both are.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_len(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
            symmetric: self.symmetric && other.symmetric,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_len(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
            symmetric: self.symmetric && other.symmetric,
        })
    }

    /// `self += alpha · a ⊗ b ⊗ c`. Clears the symmetric flag unless `a`, `b`
    /// and `c` are the same slice.
    pub fn add_outer(&mut self, alpha: f64, a: ArrayView1<f64>, b: ArrayView1<f64>, c: ArrayView1<f64>) {
        let d = self.dim;
        if !(a == b && b == c) {
            self.symmetric = false;
        }
        for i in 0..d {
            let ai = alpha * a[i];
            if ai == 0.0 {
                continue;
            }
            for j in 0..d {
                let aij = ai * b[j];
                let row = &mut self.entries[(i * d + j) * d..(i * d + j + 1) * d];
                for (slot, cl) in row.iter_mut().zip(c.iter()) {
                    *slot += aij * cl;
                }
            }
        }
    }

    /// Tensor with permuted modes: output index `(i₀, i₁, i₂)` reads input
    /// index `(i_{perm[0]}, i_{perm[1]}, i_{perm[2]})`.
    pub fn permute_modes(&self, perm: [usize; 3]) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d).with_symmetric_flag(self.symmetric);
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    let idx = [i, j, l];
                    out.entries[(i * d + j) * d + l] = self.get(idx[perm[0]], idx[perm[1]], idx[perm[2]]);
                }
            }
        }
        out
    }
}

impl Tensor3 for DenseTensor3 {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contract_mode(&self, free: Mode, p: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<Array1<f64>> {
        let d = self.dim;
        check_len(d, p.len())?;
        check_len(d, q.len())?;
        let mut out = Array1::zeros(d);
        match free {
            Mode::First => {
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..d {
                        let row = &self.entries[(i * d + j) * d..(i * d + j + 1) * d];
                        let s: f64 = row.iter().zip(q.iter()).map(|(t, w)| t * w).sum();
                        acc += p[j] * s;
                    }
                    out[i] = acc;
                }
            }
            Mode::Second => {
                for i in 0..d {
                    for j in 0..d {
                        let row = &self.entries[(i * d + j) * d..(i * d + j + 1) * d];
                        let s: f64 = row.iter().zip(q.iter()).map(|(t, w)| t * w).sum();
                        out[j] += p[i] * s;
                    }
                }
            }
            Mode::Third => {
                for i in 0..d {
                    for j in 0..d {
                        let pq = p[i] * q[j];
                        let row = &self.entries[(i * d + j) * d..(i * d + j + 1) * d];
                        for (o, t) in out.iter_mut().zip(row) {
                            *o += pq * t;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
