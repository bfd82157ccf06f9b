//! Clustering of symmetric positive definite matrices with sparse Wishart
//! mixture models.
//!
//! Observations are p x p SPD matrices (sample covariances, scatter matrices,
//! connectivity matrices). The model is a finite mixture of Wishart densities
//! whose scale matrices are estimated with an elementwise L1 penalty, so the
//! fitted scales carry exact zeros. Fitting runs a penalized EM algorithm: the
//! M-step for each scale matrix is a covariance graphical lasso problem solved
//! by coordinate descent, the degrees of freedom are updated by root finding,
//! and the number of components and the penalty level are chosen by BIC over a
//! grid.
//!
//! Everything numeric is generic over a [`Scalar`] floating point type;
//! concrete `f64` aliases are exported at the crate root.

pub mod covglasso;
pub mod dataset;
pub mod em;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model_select;
pub mod scalar;
pub mod simulate;
pub mod wishart;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` aliases for the common case.
pub type Matrix64 = linalg::Matrix<f64>;
pub type SpdMatrix64 = linalg::SpdMatrix<f64>;
pub type Dataset64 = dataset::Dataset<f64>;
pub type WishartComponent64 = wishart::WishartComponent<f64>;
pub type PenaltySpec64 = covglasso::PenaltySpec<f64>;
pub type CovglassoOptions64 = covglasso::CovglassoOptions<f64>;
pub type CovglassoSolution64 = covglasso::CovglassoSolution<f64>;
pub type MixtureParams64 = em::MixtureParams<f64>;
pub type Responsibilities64 = em::Responsibilities<f64>;
pub type FitConfig64 = em::FitConfig<f64>;
pub type FitResult64 = em::FitResult<f64>;
pub type SelectionGrid64 = model_select::SelectionGrid<f64>;
pub type SelectionTable64 = model_select::SelectionTable<f64>;
pub type SimSpec64 = simulate::SimSpec<f64>;
pub type GroundTruth64 = simulate::GroundTruth<f64>;
