//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub fn normalize(v: Array1<f64>) -> Result<Array1<f64>> {
    let n = norm(v.view());
    if !(n > 1e-300) || !n.is_finite() {
        return Err(Error::InvalidArgument(format!("cannot normalize vector of norm {n:e}")));
    }
    Ok(v / n)
}

pub fn inf_norm(v: ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Incrementally built orthonormal basis of a subspace.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    dim: usize,
    vectors: Vec<Array1<f64>>,
}

impl OrthoBasis {
    pub fn new(dim: usize) -> Self {
        Self { dim, vectors: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Array1<f64>] {
        &self.vectors
    }

    /// `P_⊥ v`; two Gram–Schmidt passes.
    pub fn project_out(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let mut r = v.to_owned();
        for _ in 0..2 {
            for b in &self.vectors {
                let c = b.dot(&r);
                r.scaled_add(-c, b);
            }
        }
        r
    }

    /// `P v`, the component inside the subspace.
    pub fn project_onto(&self, v: ArrayView1<f64>) -> Array1<f64> {
        &v - &self.project_out(v)
    }

    /// `I − V Vᵀ` as a dense matrix.
    pub fn complement_projector(&self) -> Array2<f64> {
        let mut p = Array2::eye(self.dim);
        for b in &self.vectors {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    p[[i, j]] -= b[i] * b[j];
                }
            }
        }
        p
    }

    /// Orthonormal basis of the orthogonal complement, as columns
    /// (eigenvectors of `I − V Vᵀ` with eigenvalue one).
    pub fn complement_basis(&self) -> Array2<f64> {
        let eig = SymmetricEigen::new(to_nalgebra(self.complement_projector().view()));
        let keep: Vec<usize> = (0..self.dim).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        let mut out = Array2::zeros((self.dim, keep.len()));
        for (c, &i) in keep.iter().enumerate() {
            for r in 0..self.dim {
                out[[r, c]] = eig.eigenvectors[(r, i)];
            }
        }
        out
    }

    /// Extends the basis by the residual of `v`. Returns false when `v` is
    /// already (numerically) inside the span.
    pub fn push(&mut self, v: ArrayView1<f64>) -> bool {
        let scale = norm(v);
        let r = self.project_out(v);
        let rn = norm(r.view());
        if scale == 0.0 || rn <= 1e-10 * scale {
            return false;
        }
        self.vectors.push(r / rn);
        true
    }
}

pub fn to_nalgebra(m: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Largest singular value, from the eigenvalues of the smaller Gram matrix.
pub fn spectral_norm(m: ArrayView2<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() >= m.ncols() { m.t().dot(&m) } else { m.dot(&m.t()) };
    let eig = SymmetricEigen::new(to_nalgebra(gram.view()));
    eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b)).max(0.0).sqrt()
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix.
pub fn psd_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cutoff = top * 1e-12 * m.nrows().max(1) as f64;
    let mut inv = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() > cutoff {
            let v = eig.eigenvectors.column(i);
            inv += (v * v.transpose()) / ev;
        }
    }
    inv
}

/// Symmetric square root of a PSD matrix (negative eigenvalues clipped to 0).
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > 0.0 {
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) * ev.sqrt();
        }
    }
    out
}

pub(crate) fn column_norms(m: &Array2<f64>) -> Array1<f64> {
    m.columns().into_iter().map(|c| norm(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn basis_projection_splits_norm() {
        let mut b = OrthoBasis::new(3);
        assert!(b.push(array![1.0, 1.0, 0.0].view()));
        assert!(!b.push(array![2.0, 2.0, 0.0].view()));
        let v = array![0.3, -0.2, 0.9];
        let p = b.project_out(v.view());
        let q = b.project_onto(v.view());
        let total = p.dot(&p) + q.dot(&q);
        assert!((total - v.dot(&v)).abs() < 1e-14);
        assert!(p.dot(&b.vectors()[0]).abs() < 1e-15);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = array![[3.0, 0.0], [0.0, -5.0], [0.0, 0.0]];
        assert!((spectral_norm(m.view()) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = psd_pinv(&m);
        let back = &m * &p * &m;
        assert!((back - m).abs().max() < 1e-12);
    }

    #[test]
    fn normalize_rejects_zero() {
        assert!(normalize(Array1::zeros(3)).is_err());
    }
}
