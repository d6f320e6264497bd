//! Linearly implicit step operator `P = M + ½τ S M⁻¹ S`, solved by sparse Cholesky.

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::*;
use faer::{Mat, Side};

use crate::geometry::CotanLaplacian;
use crate::mesh::Vec3;

use super::FlowError;

pub(crate) struct StepOperator<'a> {
    pub lap: &'a CotanLaplacian,
    pub mass: &'a [f64],
    /// Coefficient in front of the bilaplacian.
    pub weight: f64,
}

impl StepOperator<'_> {
    /// Lower triangle of `P` as triplets. `S` has diagonal `d_i` and
    /// off-diagonals `-w_ij`, so `(S M⁻¹ S)_ij = Σ_k S_ik S_kj / m_k`.
    fn triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        let n = self.mass.len();
        let diag = self.lap.diagonal();
        let mut out = Vec::with_capacity(n * 24);
        for (i, &m) in self.mass.iter().enumerate() {
            out.push(Triplet::new(i, i, m));
        }
        let mut col: Vec<(usize, f64)> = Vec::with_capacity(16);
        for k in 0..n {
            let (nb, w) = self.lap.row(k);
            col.clear();
            col.push((k, diag[k]));
            col.extend(nb.iter().zip(w).map(|(&j, &w)| (j, -w)));
            let s = self.weight / self.mass[k];
            for &(i, a) in &col {
                for &(j, b) in &col {
                    if i >= j {
                        out.push(Triplet::new(i, j, s * a * b));
                    }
                }
            }
        }
        out
    }

    /// Solves `P x = b` for the three coordinates at once.
    pub fn solve(&self, b: &[Vec3]) -> Result<Vec<Vec3>, FlowError> {
        let n = b.len();
        let p = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &self.triplets())
            .map_err(|e| FlowError::Solver(format!("{e:?}")))?;
        let llt = p.sp_cholesky(Side::Lower).map_err(|e| FlowError::Solver(format!("{e:?}")))?;
        let mut x = Mat::<f64>::from_fn(n, 3, |i, k| b[i][k]);
        llt.solve_in_place(x.as_mut());
        Ok((0..n).map(|i| Vec3::new(x[(i, 0)], x[(i, 1)], x[(i, 2)])).collect())
    }
}
