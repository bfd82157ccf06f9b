//! Symmetric eigendecomposition by the cyclic Jacobi method.
//!
//! Jacobi is quadratically convergent, unconditionally stable, and more than
//! fast enough at the dimensions this crate targets. Eigenvalues come back
//! sorted ascending with matching eigenvector columns.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 64;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct SymEigen<F> {
    pub values: Vec<F>,
    pub vectors: Matrix<F>,
}

/// Full decomposition of a symmetric matrix.
pub fn sym_eigen<F: Scalar>(m: &Matrix<F>) -> Result<SymEigen<F>> {
    jacobi(m, true)
}

/// Eigenvalues only; skips accumulating the rotations.
pub fn sym_eigenvalues<F: Scalar>(m: &Matrix<F>) -> Result<Vec<F>> {
    Ok(jacobi(m, false)?.values)
}

fn jacobi<F: Scalar>(m: &Matrix<F>, want_vectors: bool) -> Result<SymEigen<F>> {
    if !m.is_square() {
        return Err(Error::dim("symmetric eigen input", m.rows(), m.cols()));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut v = if want_vectors {
        Matrix::identity(n)
    } else {
        Matrix::zeros(0, 0)
    };

    let total_norm = a.frobenius_norm();
    let tol = F::epsilon() * total_norm * F::of(n as f64);

    for _sweep in 0..MAX_SWEEPS {
        let mut off = F::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + a[(i, j)] * a[(i, j)];
            }
        }
        if (off + off).sqrt() <= tol || off == F::zero() {
            return Ok(collect(a, v, n, want_vectors));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == F::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (F::of(2.0) * apq);
                let t = {
                    let s = if theta >= F::zero() {
                        F::one()
                    } else {
                        -F::one()
                    };
                    s / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                if want_vectors {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    Err(Error::numerical(format!(
        "Jacobi eigen failed to converge in {MAX_SWEEPS} sweeps (n = {n})"
    )))
}

fn collect<F: Scalar>(
    a: Matrix<F>,
    v: Matrix<F>,
    n: usize,
    want_vectors: bool,
) -> SymEigen<F> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(i, i)]
            .partial_cmp(&a[(j, j)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = if want_vectors {
        Matrix::from_fn(n, n, |r, c| v[(r, order[c])])
    } else {
        Matrix::zeros(0, 0)
    };
    SymEigen { values, vectors }
}
