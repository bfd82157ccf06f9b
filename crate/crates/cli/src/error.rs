//! Command outcomes folded into the two failure exit codes: 2 for anything
//! wrong with the inputs (files, configs, dimensions), 1 for fits that were
//! set up correctly but failed numerically.

use std::fmt;
use std::process::ExitCode;

use swm_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Bad user input: malformed files, inconsistent configs, impossible
    /// requests. Exit code 2.
    Validation(String),
    /// The computation itself failed: divergence, degenerate components,
    /// numerical breakdown. Exit code 1.
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::DomainError { .. }
            | CoreError::DimMismatch { .. }
            | CoreError::LengthMismatch { .. }
            | CoreError::InvalidDof { .. }
            | CoreError::NotSymmetric { .. }
            | CoreError::NotPositiveDefinite { .. }
            | CoreError::TooFewObservations { .. }
            | CoreError::AllZeroPrior => CliError::Validation(e.to_string()),
            CoreError::Diverged { .. }
            | CoreError::SingularInit
            | CoreError::EmptyComponent { .. }
            | CoreError::NumericalFailure { .. }
            | CoreError::NoRootInBracket { .. }
            | CoreError::DegenerateFit { .. }
            | CoreError::AllFitsFailed => CliError::Runtime(e.to_string()),
        }
    }
}

/// IO problems are treated as input problems: the paths came from the user.
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}
