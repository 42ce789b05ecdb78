use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use super::SampleBatch;
use crate::error::{check_len, Error, Result};
use crate::tensor::{DenseTensor3, Mode, Tensor3, DENSE_DIM_LIMIT};

/// Samples per accumulation shard. Shards are summed in index order, so
/// the result does not depend on the thread count.
const SHARD: usize = 2048;

/// `Σ_τ x_τ ⊗ y_τ ⊗ z_τ / n` over the columns of three `d × n` matrices.
pub(crate) fn average_outer(x: ArrayView2<f64>, y: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<Vec<f64>> {
    let (d, n) = x.dim();
    if d > DENSE_DIM_LIMIT {
        return Err(Error::Resource(format!("moment tensor with d = {d} exceeds dense limit {DENSE_DIM_LIMIT}")));
    }
    let shards: Vec<Vec<f64>> = (0..n.div_ceil(SHARD))
        .into_par_iter()
        .map(|s| {
            let mut acc = vec![0.0; d * d * d];
            for tau in s * SHARD..((s + 1) * SHARD).min(n) {
                let (a, b, c) = (x.column(tau), y.column(tau), z.column(tau));
                for i in 0..d {
                    for j in 0..d {
                        let ab = a[i] * b[j];
                        let row = &mut acc[(i * d + j) * d..(i * d + j + 1) * d];
                        for (r, cl) in row.iter_mut().zip(c.iter()) {
                            *r += ab * cl;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; d * d * d];
    for shard in shards {
        for (t, s) in total.iter_mut().zip(shard) {
            *t += s;
        }
    }
    let inv = 1.0 / n as f64;
    total.iter_mut().for_each(|t| *t *= inv);
    Ok(total)
}

/// Cross-view empirical moment `(1/n) Σ z₁ ⊗ z₂ ⊗ z₃` from the first three views.
pub fn empirical_third_moment(batch: &SampleBatch) -> Result<DenseTensor3> {
    if batch.view_count() < 3 {
        return Err(Error::InvalidArgument(format!("need 3 views, batch has {}", batch.view_count())));
    }
    let entries = average_outer(batch.view(0).view(), batch.view(1).view(), batch.view(2).view())?;
    DenseTensor3::from_entries(batch.dim(), entries, false)
}

/// The empirical moment kept as its samples. Contractions cost `O(dn)`
/// and need no `d³` storage:
/// `T̂(I, p, q) = (1/n) Z₁ ((Z₂ᵀp) ∘ (Z₃ᵀq))`.
#[derive(Debug, Clone)]
pub struct ImplicitMomentTensor {
    views: [Array2<f64>; 3],
}

impl ImplicitMomentTensor {
    pub fn new(batch: &SampleBatch) -> Result<Self> {
        if batch.view_count() < 3 {
            return Err(Error::InvalidArgument(format!("need 3 views, batch has {}", batch.view_count())));
        }
        Ok(Self { views: [batch.view(0).clone(), batch.view(1).clone(), batch.view(2).clone()] })
    }

    pub fn sample_count(&self) -> usize {
        self.views[0].ncols()
    }
}

impl Tensor3 for ImplicitMomentTensor {
    fn dim(&self) -> usize {
        self.views[0].nrows()
    }

    fn contract_mode(&self, free: Mode, p: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len(self.dim(), p.len())?;
        check_len(self.dim(), q.len())?;
        let (f, g, h) = match free {
            Mode::First => (0, 1, 2),
            Mode::Second => (1, 0, 2),
            Mode::Third => (2, 0, 1),
        };
        let gp = self.views[g].t().dot(&p);
        let hq = self.views[h].t().dot(&q);
        let coeff = gp * hq / self.sample_count() as f64;
        Ok(self.views[f].dot(&coeff))
    }
}
