//! Dense real matrices and the SPD-specific operations the models need:
//! Cholesky factorization, inverses, log-determinants, and the symmetric
//! matrix logarithm. Sizes stay small (p <= 200), so the implementations
//! favor accuracy and clarity over blocked performance.

pub mod eigen;
pub mod special;

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative asymmetry above which an input is rejected instead of symmetrized.
const ASYMMETRY_TOL: f64 = 1e-8;

/// Cholesky pivot threshold, relative to the largest diagonal entry.
const PIVOT_TOL: f64 = 1e-12;

/// Dense row-major matrix. General container; no shape invariants beyond
/// rectangularity.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        for row in &rows {
            if row.len() != c {
                return Err(Error::dim("matrix row length", c, row.len()));
            }
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("matrix buffer length", rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix<F> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.cols != other.rows {
            return Err(Error::dim("matmul inner dimension", self.cols, other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == F::zero() {
                    continue;
                }
                let orow = other.row(k);
                let out_row =
                    &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o = *o + aik * b;
                }
            }
        }
        Ok(out)
    }

    /// Self * selfᵀ, with exact symmetry by construction.
    pub fn gram(&self) -> Matrix<F> {
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(&a, &b)| a * b)
                    .sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn scale(&self, c: F) -> Matrix<F> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    pub fn add(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim("matrix add", self.data.len(), other.data.len()));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        self.add(&other.scale(-F::one()))
    }

    pub fn frobenius_norm(&self) -> F {
        self.data
            .iter()
            .map(|&x| x * x)
            .fold(F::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn max_abs(&self) -> F {
        self.data
            .iter()
            .fold(F::zero(), |acc, &x| acc.max(x.abs()))
    }
}

impl<F> Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

/// Definiteness status established when an [`SpdMatrix`] is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    PositiveDefinite,
    /// Cholesky hit a pivot at or below the tolerance. The matrix is kept,
    /// but operations needing full rank reject it.
    SemiDefiniteOnly,
}

/// Symmetric positive (semi-)definite matrix.
///
/// Entries are exactly symmetric: construction averages `(M + Mᵀ)/2` when the
/// relative asymmetry is within 1e-8 and rejects the input otherwise, so file
/// round-trip noise is absorbed without masking data errors. Definiteness is
/// classified once, by attempting a Cholesky factorization with pivot
/// threshold `1e-12 * max diagonal`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix<F> {
    dim: usize,
    data: Vec<F>,
    definiteness: Definiteness,
}

impl<F: Scalar> SpdMatrix<F> {
    pub fn from_matrix(m: &Matrix<F>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim("square matrix", m.rows(), m.cols()));
        }
        if m.rows() == 0 {
            return Err(Error::domain("SPD matrix dimension must be positive"));
        }
        let n = m.rows();
        let max_abs = m.max_abs();
        let mut asym = F::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if max_abs > F::zero() && asym / max_abs > F::of(ASYMMETRY_TOL) {
            return Err(Error::NotSymmetric {
                rel_asymmetry: (asym / max_abs).as_f64(),
            });
        }
        let half = F::of(0.5);
        let mut data = vec![F::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j {
                    m[(i, i)]
                } else {
                    (m[(i, j)] + m[(j, i)]) * half
                };
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        for i in 0..n {
            let d = data[i * n + i];
            if d < F::zero() {
                return Err(Error::not_pd(format!(
                    "diagonal entry {i} is negative ({})",
                    d.as_f64()
                )));
            }
        }
        let definiteness = match cholesky_raw(n, &data) {
            Ok(_) => Definiteness::PositiveDefinite,
            Err(_) => Definiteness::SemiDefiniteOnly,
        };
        Ok(SpdMatrix {
            dim: n,
            data,
            definiteness,
        })
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        SpdMatrix::from_matrix(&Matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix::from_matrix(&Matrix::identity(n)).expect("identity is SPD")
    }

    pub fn diagonal(d: &[F]) -> Result<Self> {
        let n = d.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = d[i];
        }
        SpdMatrix::from_matrix(&m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, i: usize, j: usize) -> F {
        self.data[i * self.dim + j]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    pub fn is_positive_definite(&self) -> bool {
        self.definiteness == Definiteness::PositiveDefinite
    }

    pub fn to_matrix(&self) -> Matrix<F> {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    pub fn trace(&self) -> F {
        (0..self.dim)
            .map(|i| self.data[i * self.dim + i])
            .fold(F::zero(), |a, b| a + b)
    }

    /// Returns `self + c * I`, reclassifying definiteness.
    pub fn add_scaled_identity(&self, c: F) -> Result<SpdMatrix<F>> {
        let mut m = self.to_matrix();
        for i in 0..self.dim {
            m[(i, i)] = m[(i, i)] + c;
        }
        SpdMatrix::from_matrix(&m)
    }

    /// Lower-triangular Cholesky factor L with `L Lᵀ = self`.
    pub fn cholesky(&self) -> Result<Cholesky<F>> {
        let l = cholesky_raw(self.dim, &self.data).map_err(|j| {
            Error::not_pd(format!("Cholesky pivot {j} at or below tolerance"))
        })?;
        Ok(Cholesky { dim: self.dim, l })
    }

    pub fn log_det(&self) -> Result<F> {
        Ok(self.cholesky()?.log_det())
    }

    pub fn inverse(&self) -> Result<SpdMatrix<F>> {
        self.cholesky()?.inverse()
    }

    /// Symmetric matrix logarithm via eigendecomposition.
    ///
    /// Eigenvalues at or below `1e-12 * max eigenvalue` are treated as a
    /// positive definiteness failure rather than silently producing `-inf`.
    pub fn logm(&self) -> Result<Matrix<F>> {
        let eig = eigen::sym_eigen(&self.to_matrix())?;
        let max = eig
            .values
            .iter()
            .fold(F::zero(), |acc, &v| acc.max(v.abs()));
        let floor = F::of(PIVOT_TOL) * max;
        let logs = eig
            .values
            .iter()
            .map(|&v| {
                if v <= floor {
                    Err(Error::not_pd(format!(
                        "eigenvalue {} too small for matrix log",
                        v.as_f64()
                    )))
                } else {
                    Ok(v.ln())
                }
            })
            .collect::<Result<Vec<F>>>()?;
        // Q diag(log λ) Qᵀ with symmetric fill.
        let n = self.dim;
        let q = &eig.vectors;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = F::zero();
                for (k, &lv) in logs.iter().enumerate() {
                    s = s + q[(i, k)] * lv * q[(j, k)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        Ok(out)
    }

    /// Builds from data known to be symmetric (exact) and PD by construction.
    /// Still classifies, so a numerically borderline input degrades to
    /// `SemiDefiniteOnly` instead of lying.
    pub(crate) fn from_symmetric_unchecked(dim: usize, data: Vec<F>) -> SpdMatrix<F> {
        debug_assert_eq!(data.len(), dim * dim);
        let definiteness = match cholesky_raw(dim, &data) {
            Ok(_) => Definiteness::PositiveDefinite,
            Err(_) => Definiteness::SemiDefiniteOnly,
        };
        SpdMatrix {
            dim,
            data,
            definiteness,
        }
    }
}

/// Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<F> {
    dim: usize,
    /// Lower triangle, row-major, strict upper part zero.
    l: Vec<F>,
}

impl<F: Scalar> Cholesky<F> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> Matrix<F> {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.l.clone(),
        }
    }

    /// log det(A) = 2 Σ log L_jj.
    pub fn log_det(&self) -> F {
        let two = F::of(2.0);
        (0..self.dim)
            .map(|j| self.l[j * self.dim + j].ln())
            .fold(F::zero(), |a, b| a + b)
            * two
    }

    /// Solves A x = b.
    pub fn solve_vec(&self, b: &[F]) -> Result<Vec<F>> {
        if b.len() != self.dim {
            return Err(Error::dim("solve rhs length", self.dim, b.len()));
        }
        let n = self.dim;
        // Forward: L y = b.
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        // Backward: Lᵀ x = y.
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        Ok(y)
    }

    /// A⁻¹, exactly symmetric (computed as TᵀT with T = L⁻¹).
    pub fn inverse(&self) -> Result<SpdMatrix<F>> {
        let inv = invert_from_factor(self.dim, &self.l);
        Ok(SpdMatrix::from_symmetric_unchecked(self.dim, inv))
    }
}

/// Inverse from a lower Cholesky factor: A⁻¹ = TᵀT with T = L⁻¹.
fn invert_from_factor<F: Scalar>(n: usize, l: &[F]) -> Vec<F> {
    // T = L⁻¹ by forward substitution, one column at a time.
    let mut t = vec![F::zero(); n * n];
    for j in 0..n {
        t[j * n + j] = F::one() / l[j * n + j];
        for i in (j + 1)..n {
            let mut s = F::zero();
            for k in j..i {
                s = s - l[i * n + k] * t[k * n + j];
            }
            t[i * n + j] = s / l[i * n + i];
        }
    }
    // A⁻¹ entry (i,j) = Σ_k T_ki T_kj, summed over k >= max(i,j).
    let mut inv = vec![F::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = F::zero();
            for k in i..n {
                s = s + t[k * n + i] * t[k * n + j];
            }
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    inv
}

/// Inverse of a symmetric PD buffer without constructing an `SpdMatrix`.
/// Used by inner loops that invert principal submatrices.
pub(crate) fn invert_spd_raw<F: Scalar>(n: usize, a: &[F]) -> Result<Vec<F>> {
    let l = cholesky_raw(n, a)
        .map_err(|j| Error::not_pd(format!("submatrix Cholesky pivot {j}")))?;
    Ok(invert_from_factor(n, &l))
}

/// Plain lower Cholesky on a row-major symmetric buffer. Returns the factor
/// or the index of the failing pivot.
fn cholesky_raw<F: Scalar>(n: usize, a: &[F]) -> std::result::Result<Vec<F>, usize> {
    let mut max_diag = F::zero();
    for j in 0..n {
        max_diag = max_diag.max(a[j * n + j]);
    }
    let tol = F::of(PIVOT_TOL) * max_diag;
    let mut l = vec![F::zero(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if d <= tol || !d.is_finite() {
            return Err(j);
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(l)
}

/// tr(A⁻¹ B) for symmetric B, given A's inverse: Σ_ij (A⁻¹)_ij B_ij.
pub fn trace_product<F: Scalar>(a_inv: &SpdMatrix<F>, b: &SpdMatrix<F>) -> Result<F> {
    if a_inv.dim() != b.dim() {
        return Err(Error::dim("trace product dims", a_inv.dim(), b.dim()));
    }
    Ok(a_inv
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x * y)
        .fold(F::zero(), |a, b| a + b))
}
