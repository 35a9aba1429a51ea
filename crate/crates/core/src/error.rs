use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },
    #[error("index out of range in `{var}`: {msg}")]
    IndexOutOfRange { var: String, msg: String },
    #[error("missing value for symbol `{0}`")]
    MissingSymbol(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("Lagrangian is not hyperregular: {0}")]
    NotHyperregular(String),
    #[error("unsupported form: {0}")]
    UnsupportedForm(String),
    #[error("constraint forms are rank deficient: {0}")]
    RankDeficient(String),
    #[error("variable role violation: {0}")]
    VariableRole(String),
    #[error("multiplier field required for `{0}`")]
    MissingMultipliers(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("operator is not elliptic: {0}")]
    NotElliptic(String),
    #[error("step rejected: {0}")]
    StepRejected(String),
    #[error("time step violates stability bound: {0}")]
    CflViolation(String),
    #[error("perturbation does not vanish on the boundary: {0}")]
    BoundaryViolation(String),
    #[error("invalid problem file: {0}")]
    Problem(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
