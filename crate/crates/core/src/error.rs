//! Error type shared by all modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building inputs or fitting models.
///
/// Diagnostic payloads are stored as `f64` regardless of the scalar type the
/// computation ran in; errors are cold paths and only feed messages.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not symmetric: relative asymmetry {rel_asymmetry:.3e} exceeds 1e-8")]
    NotSymmetric { rel_asymmetry: f64 },

    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: String },

    #[error("argument outside domain: {what}")]
    DomainError { what: String },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("degrees of freedom {dof} must exceed p - 1 = {min} and be finite")]
    InvalidDof { dof: f64, min: f64 },

    #[error(
        "no root in bracket ({lo:.6e}, {hi:.6e}): target lies {} the reachable range",
        if *below_lower { "below" } else { "above" }
    )]
    NoRootInBracket {
        lo: f64,
        hi: f64,
        below_lower: bool,
    },

    #[error("coordinate descent objective increased by {increase:.3e} at sweep {sweep}")]
    Diverged { sweep: usize, increase: f64 },

    #[error("initial sigma for coordinate descent is not positive definite")]
    SingularInit,

    #[error("component {component} collapsed: soft count {soft_count:.3e} below 1e-6")]
    EmptyComponent { component: usize, soft_count: f64 },

    #[error("numerical failure: {what}")]
    NumericalFailure { what: String },

    #[error("{n} observations cannot support {k} clusters")]
    TooFewObservations { n: usize, k: usize },

    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("fit degenerated even after a perturbed restart (component {component})")]
    DegenerateFit { component: usize },

    #[error("every cell of the selection grid failed to fit")]
    AllFitsFailed,

    #[error("prior weight matrix is identically zero")]
    AllZeroPrior,
}

impl Error {
    pub(crate) fn domain(what: impl Into<String>) -> Self {
        Error::DomainError { what: what.into() }
    }

    pub(crate) fn not_pd(context: impl Into<String>) -> Self {
        Error::NotPositiveDefinite {
            context: context.into(),
        }
    }

    pub(crate) fn dim(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::DimMismatch {
            what: what.into(),
            expected,
            got,
        }
    }

    pub(crate) fn numerical(what: impl Into<String>) -> Self {
        Error::NumericalFailure { what: what.into() }
    }
}
