//! Cyclic Jacobi eigensolver for dense symmetric matrices.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-9;

/// Eigenpairs sorted by descending eigenvalue; column `i` of `vectors` is `v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
    pub sweeps: usize,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }

    /// `Vᵀ Y`: entry `(i, k)` is `v_iᵀ Y^k`.
    pub fn project(&self, y: &Matrix) -> Result<Matrix> {
        self.vectors.transpose().matmul(y)
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn spectral_map(&self, values: &[f64]) -> Result<Matrix> {
        let scaled = Matrix::from_fn(self.dim(), self.dim(), |r, c| self.vectors[(r, c)] * values[c]);
        scaled.matmul(&self.vectors.transpose())
    }

    pub fn reconstruct(&self) -> Result<Matrix> {
        self.spectral_map(&self.values)
    }
}

/// Diagonalizes a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps until every off-diagonal magnitude is below `1e-12 * ‖A‖_F` or 100
/// sweeps have run. Inputs asymmetric by more than `1e-9` (relative to the
/// largest entry, floored at 1) are rejected.
pub fn jacobi_eigen(matrix: &Matrix) -> Result<EigenDecomposition> {
    if !matrix.is_square() {
        return Err(Error::Input(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            matrix.rows(),
            matrix.cols()
        )));
    }
    let n = matrix.rows();
    let asym = matrix.asymmetry();
    if asym > SYMMETRY_TOL * matrix.max_abs().max(1.0) {
        return Err(Error::Input(format!("matrix is not symmetric (max |a_ij - a_ji| = {asym:e})")));
    }
    let mut a = Matrix::from_fn(n, n, |r, c| 0.5 * (matrix[(r, c)] + matrix[(c, r)]));
    let mut v = Matrix::identity(n);
    let threshold = OFF_DIAGONAL_TOL * a.frobenius_norm();

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off < threshold || off == 0.0 {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < threshold || apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors, sweeps })
}

/// Applies `A <- Jᵀ A J`, `V <- V J` for the rotation in the (p, q) plane that
/// zeroes `A[p][q]`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let apq = a[(p, q)];
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq;
    }
    a[(p, p)] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
    a[(q, q)] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
