//! One-sided (Hestenes) Jacobi SVD for small dense matrices.

use super::{dot, DenseMatrix, DenseVector};
use crate::error::{Error, Result};

/// Singular values at or below `RANK_TOLERANCE * ‖A‖` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(s) Vᵀ`, singular values sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    /// m x k, columns are left singular vectors
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    /// n x k, columns are right singular vectors
    pub v: DenseMatrix,
}

impl Svd {
    pub fn compute(a: &DenseMatrix) -> Result<Svd> {
        if a.is_empty() {
            return Err(Error::dim(format!(
                "SVD of an empty {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        if a.rows() >= a.cols() {
            let (u, s, v) = hestenes(a);
            Ok(Svd { u, s, v })
        } else {
            // Work on the tall transpose and swap the factors back.
            let (u, s, v) = hestenes(&a.transpose());
            Ok(Svd { u: v, s, v: u })
        }
    }

    pub fn max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    /// Numerical rank under the relative tolerance.
    pub fn rank(&self) -> usize {
        let cut = RANK_TOLERANCE * self.max();
        self.s.iter().filter(|v| **v > cut).count()
    }

    /// Orthogonal projection of `y` (length m) onto the column space of A,
    /// i.e. removal of the component in the null space of Aᵀ.
    pub fn project_onto_range(&self, y: &[f64]) -> DenseVector {
        let m = self.u.rows();
        let mut out = DenseVector::zeros(m);
        for k in 0..self.rank() {
            let col: Vec<f64> = (0..m).map(|i| self.u.get(i, k)).collect();
            let c = dot(&col, y);
            out.axpy(c, &col);
        }
        out
    }
}

/// Returns (U, s, V) for a tall matrix (rows >= cols).
fn hestenes(a: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let m = a.rows();
    let n = a.cols();
    // Column-major working copies: w[j] is column j of A V.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = w.iter().enumerate().map(|(j, col)| (dot(col, col).sqrt(), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));

    let smax = order.first().map(|o| o.0).unwrap_or(0.0);
    let mut u_mat = DenseMatrix::zeros(m, n);
    let mut v_mat = DenseMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, (sigma, j)) in order.iter().enumerate() {
        s.push(*sigma);
        if *sigma > RANK_TOLERANCE * smax && *sigma > 0.0 {
            for i in 0..m {
                u_mat.set(i, k, w[*j][i] / sigma);
            }
        }
        for i in 0..n {
            v_mat.set(i, k, v[*j][i]);
        }
    }
    (u_mat, s, v_mat)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Operator 2-norm (largest singular value).
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(Svd::compute(a)?.max())
}

/// Smallest singular value above `RANK_TOLERANCE * ‖A‖`.
pub fn sigma_min_nonzero(a: &DenseMatrix) -> Result<f64> {
    let svd = Svd::compute(a)?;
    let cut = RANK_TOLERANCE * svd.max();
    svd.s
        .iter()
        .copied()
        .rfind(|v| *v > cut && *v > 0.0)
        .ok_or_else(|| {
            Error::NoNonzeroSingularValue(format!("{}x{} matrix is zero", a.rows(), a.cols()))
        })
}
