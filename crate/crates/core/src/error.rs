use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("observation ({row}, {col}) outside a {m}x{n} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        m: usize,
        n: usize,
    },

    #[error("duplicate observation at ({row}, {col})")]
    DuplicateObservation { row: usize, col: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("matrix has full column rank; no null vector exists")]
    NoNullVector,

    #[error("transform is singular")]
    SingularTransform,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("series is constant; autocorrelation is undefined")]
    UndefinedVariance,

    #[error("series too short: need at least {needed} samples, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("inconsistent monitors across chains: {0}")]
    InconsistentMonitors(String),
}

pub(crate) fn shape_err(what: &'static str, expected: (usize, usize), found: (usize, usize)) -> Error {
    Error::ShapeMismatch {
        what,
        expected: format!("{}x{}", expected.0, expected.1),
        found: format!("{}x{}", found.0, found.1),
    }
}
