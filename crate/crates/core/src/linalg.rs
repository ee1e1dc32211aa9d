//! Small dense linear algebra used by the model and control layers.
//!
//! Generic routines work on row-major slices so they run unchanged on jets.
//! Decompositions that only need real values (SVD, pseudo-inverse) go
//! through nalgebra.

use nalgebra::DMatrix;

use crate::error::{ensure_len, Error, Result};
use crate::scalar::Scalar;

/// Inertia matrices with a 1-norm condition number above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// LU factorization with partial pivoting of an `n × n` row-major matrix.
///
/// Pivots are chosen on primal values, so the factorization of a jet
/// matrix differentiates the same elimination sequence.
pub struct Lu<S> {
    n: usize,
    lu: Vec<S>,
    perm: Vec<usize>,
}

impl<S: Scalar> Lu<S> {
    pub fn new(a: &[S], n: usize) -> Result<Self> {
        ensure_len("LU input", n * n, a.len())?;
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].to_f64().abs();
            for r in (k + 1)..n {
                let v = lu[r * n + k].to_f64().abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularInertia {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                perm.swap(p, k);
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                for c in (k + 1)..n {
                    let sub = factor * lu[k * n + c];
                    lu[r * n + c] -= sub;
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    /// Solves `A X = B` for `B` with `cols` columns, row-major.
    pub fn solve(&self, b: &[S], cols: usize) -> Result<Vec<S>> {
        let n = self.n;
        ensure_len("LU right-hand side", n * cols, b.len())?;
        let mut x: Vec<S> = Vec::with_capacity(n * cols);
        for &p in &self.perm {
            x.extend_from_slice(&b[p * cols..(p + 1) * cols]);
        }
        for c in 0..cols {
            for r in 1..n {
                let mut acc = x[r * cols + c];
                for k in 0..r {
                    acc -= self.lu[r * n + k] * x[k * cols + c];
                }
                x[r * cols + c] = acc;
            }
            for r in (0..n).rev() {
                let mut acc = x[r * cols + c];
                for k in (r + 1)..n {
                    acc -= self.lu[r * n + k] * x[k * cols + c];
                }
                x[r * cols + c] = acc / self.lu[r * n + r];
            }
        }
        Ok(x)
    }
}

fn one_norm(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|c| (0..n).map(|r| a[r * n + c].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number `‖A‖₁‖A⁻¹‖₁` of the primal part of `a`.
pub fn condition_number<S: Scalar>(a: &[S], n: usize) -> Result<f64> {
    let real: Vec<f64> = a.iter().map(Scalar::to_f64).collect();
    let lu = match Lu::new(&real, n) {
        Ok(lu) => lu,
        Err(_) => return Ok(f64::INFINITY),
    };
    let mut eye = vec![0.0; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    let inv = lu.solve(&eye, n)?;
    let cond = one_norm(&real, n) * one_norm(&inv, n);
    Ok(if cond.is_finite() { cond } else { f64::INFINITY })
}

/// Solves `A X = B` after rejecting ill-conditioned `A`.
pub fn solve_checked<S: Scalar>(a: &[S], n: usize, b: &[S], cols: usize) -> Result<Vec<S>> {
    let condition = condition_number(a, n)?;
    if condition > MAX_CONDITION {
        return Err(Error::SingularInertia { condition });
    }
    Lu::new(a, n)?.solve(b, cols)
}

/// Smallest singular value of a `rows × cols` matrix (0 for empty shapes).
pub fn sigma_min(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Row-major `rows × cols` slice as an nalgebra matrix.
pub fn to_matrix(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

/// Right pseudo-inverse applied to `v`: the minimum-norm `u` with `A u = v`
/// for a full-row-rank `A`.
///
/// Fails when the smallest of the `rows` singular values is below `threshold`.
pub fn right_pseudo_solve(a: &DMatrix<f64>, v: &[f64], threshold: f64) -> Result<Vec<f64>> {
    ensure_len("pseudo-inverse right-hand side", a.nrows(), v.len())?;
    let rows = a.nrows();
    if rows > a.ncols() {
        return Err(Error::RankDeficientAtState { sigma_min: 0.0 });
    }
    let svd = a.clone().svd(true, true);
    let smin = svd
        .singular_values
        .iter()
        .take(rows)
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(smin >= threshold) {
        return Err(Error::RankDeficientAtState { sigma_min: smin });
    }
    let rhs = nalgebra::DVector::from_column_slice(v);
    let u = svd
        .solve(&rhs, threshold)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(u.iter().copied().collect())
}
