//! Observation container: a sample of symmetric positive definite matrices
//! with one shared dimension, identifiers, and cached log-determinants.

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::scalar::Scalar;

/// Relative jitter applied to semidefinite-only observations at load time.
const LOAD_JITTER: f64 = 1e-6;

/// A fixed sample of n positive definite p x p matrices. Semidefinite-only
/// inputs are repaired once at construction by adding
/// `1e-6 · tr(Γ)/p · I` (the density needs log|Γ|), and the repair is
/// recorded per observation so downstream reports can disclose it.
/// Log-determinants are computed once here; the E-step reads them on every
/// iteration.
#[derive(Debug, Clone)]
pub struct Dataset<F> {
    matrices: Vec<SpdMatrix<F>>,
    ids: Vec<String>,
    log_dets: Vec<F>,
    jittered: Vec<bool>,
    dim: usize,
}

impl<F: Scalar> Dataset<F> {
    /// Builds a dataset with generated identifiers `m0000`, `m0001`, ...
    pub fn new(matrices: Vec<SpdMatrix<F>>) -> Result<Self> {
        let ids = (0..matrices.len()).map(|i| format!("m{i:04}")).collect();
        Dataset::with_ids(matrices, ids)
    }

    pub fn with_ids(matrices: Vec<SpdMatrix<F>>, ids: Vec<String>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::domain("dataset needs at least one observation"));
        }
        if ids.len() != matrices.len() {
            return Err(Error::LengthMismatch {
                left: matrices.len(),
                right: ids.len(),
            });
        }
        let dim = matrices[0].dim();
        let n = matrices.len();
        let mut fixed = Vec::with_capacity(n);
        let mut log_dets = Vec::with_capacity(n);
        let mut jittered = Vec::with_capacity(n);
        for (i, m) in matrices.into_iter().enumerate() {
            if m.dim() != dim {
                return Err(Error::dim(
                    format!("observation {} dimension", ids[i]),
                    dim,
                    m.dim(),
                ));
            }
            let (m, was_jittered) = if m.is_positive_definite() {
                (m, false)
            } else {
                let bump = F::of(LOAD_JITTER) * m.trace() / F::of(dim as f64);
                let repaired = m.add_scaled_identity(bump)?;
                if !repaired.is_positive_definite() {
                    return Err(Error::not_pd(format!(
                        "observation {} is singular even after load jitter",
                        ids[i]
                    )));
                }
                (repaired, true)
            };
            log_dets.push(m.log_det()?);
            jittered.push(was_jittered);
            fixed.push(m);
        }
        Ok(Dataset {
            matrices: fixed,
            ids,
            log_dets,
            jittered,
            dim,
        })
    }

    pub fn n(&self) -> usize {
        self.matrices.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mat(&self, i: usize) -> &SpdMatrix<F> {
        &self.matrices[i]
    }

    pub fn matrices(&self) -> &[SpdMatrix<F>] {
        &self.matrices
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Cached log|Γ_i|.
    pub fn log_det(&self, i: usize) -> F {
        self.log_dets[i]
    }

    pub fn log_dets(&self) -> &[F] {
        &self.log_dets
    }

    /// Whether observation i was repaired at load.
    pub fn jitter_applied(&self, i: usize) -> bool {
        self.jittered[i]
    }

    pub fn jitter_flags(&self) -> &[bool] {
        &self.jittered
    }

    /// Reorders observations; used to check that fits do not depend on
    /// input order beyond relabeling.
    pub fn permuted(&self, order: &[usize]) -> Result<Dataset<F>> {
        if order.len() != self.n() {
            return Err(Error::LengthMismatch {
                left: self.n(),
                right: order.len(),
            });
        }
        let mut seen = vec![false; self.n()];
        for &i in order {
            if i >= self.n() || seen[i] {
                return Err(Error::domain("permutation must visit each index once"));
            }
            seen[i] = true;
        }
        Ok(Dataset {
            matrices: order.iter().map(|&i| self.matrices[i].clone()).collect(),
            ids: order.iter().map(|&i| self.ids[i].clone()).collect(),
            log_dets: order.iter().map(|&i| self.log_dets[i]).collect(),
            jittered: order.iter().map(|&i| self.jittered[i]).collect(),
            dim: self.dim,
        })
    }
}
