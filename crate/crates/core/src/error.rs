use std::fmt;

/// Errors produced by construction, evaluation, and bound computations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Distribution or family parameters violate their constraints.
    InvalidParameter(String),
    /// Instance-level validation failure (empty job list, zero-mean job, ...).
    InvalidInstance(String),
    /// A discrete support grew past the configured cap.
    SupportCapExceeded { support: usize, cap: usize },
    /// Joint-scenario enumeration would exceed the configured cap.
    ScenarioCapExceeded { scenarios: u128, cap: usize },
    /// Exhaustive search requested on more jobs than the configured cap.
    JobCapExceeded { jobs: usize, cap: usize },
    /// Exact evaluation requested for a distribution without finite support.
    NotDiscrete(String),
    /// Bracketed root refinement did not converge.
    RootFind(String),
    /// Adaptive quadrature did not reach the requested tolerance.
    Quadrature(String),
}

impl Error {
    /// Process exit code for the CLI: 2 invalid input, 3 cap exceeded, 4 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidParameter(_) | Error::InvalidInstance(_) => 2,
            Error::SupportCapExceeded { .. }
            | Error::ScenarioCapExceeded { .. }
            | Error::JobCapExceeded { .. }
            | Error::NotDiscrete(_) => 3,
            Error::RootFind(_) | Error::Quadrature(_) => 4,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InvalidInstance(msg) => write!(f, "invalid instance: {msg}"),
            Error::SupportCapExceeded { support, cap } => {
                write!(f, "discrete support {support} exceeds cap {cap}")
            }
            Error::ScenarioCapExceeded { scenarios, cap } => {
                write!(f, "scenario count {scenarios} exceeds cap {cap}")
            }
            Error::JobCapExceeded { jobs, cap } => {
                write!(f, "{jobs} jobs exceed exhaustive-search cap {cap}")
            }
            Error::NotDiscrete(msg) => write!(f, "exact evaluation needs finite support: {msg}"),
            Error::RootFind(msg) => write!(f, "root finding failed: {msg}"),
            Error::Quadrature(msg) => write!(f, "quadrature failed: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
