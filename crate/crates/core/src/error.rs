use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes. Each maps to a distinct process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorClass {
    Io,
    Input,
    Assumption,
    Numeric,
}

impl ErrorClass {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorClass::Io => 1,
            ErrorClass::Input => 2,
            ErrorClass::Assumption => 3,
            ErrorClass::Numeric => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input `{key}`: {message}")]
    Input { key: String, message: String },

    #[error("insufficient resolution: need M >= {required_m} for |rho| = {rho}")]
    Resolution { rho: f64, required_m: usize },

    #[error("no sign change on bracket [{a}, {b}] (f(a) = {fa:e}, f(b) = {fb:e})")]
    NoSignChange { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("bordered matrix of size {size} exceeds the limit of {limit}")]
    MatrixTooLarge { size: usize, limit: usize },

    #[error(
        "spectrum window {window} on ({lo:.6}, {hi:.6}] holds {found} roots, expected {expected}: {roots:?}"
    )]
    Classification {
        window: usize,
        lo: f64,
        hi: f64,
        found: usize,
        expected: usize,
        roots: Vec<f64>,
    },

    #[error("zero eigenvalue in subsequence {sequence} at k = {k}")]
    ZeroEigenvalue { sequence: usize, k: usize },

    /// Assumption (i) fails at `mu_{k,j}`.
    #[error("assumption (i) violated on known edge l = {edge}, k = {k}, j = {j}: {detail}")]
    AssumptionI {
        edge: usize,
        k: usize,
        j: usize,
        detail: String,
    },

    /// Assumption (iii): the frozen-argument sine sum vanishes at integers.
    #[error("assumption (iii) violated: sum of sin(n a_k) vanishes for every requested mode (skipped {skipped:?})")]
    AssumptionIII { skipped: Vec<usize> },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn input(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Input {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) => ErrorClass::Io,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => ErrorClass::Io,
            Error::InvalidArgument(_)
            | Error::Input { .. }
            | Error::Json(_)
            | Error::Csv(_)
            | Error::MatrixTooLarge { .. }
            | Error::ZeroEigenvalue { .. } => ErrorClass::Input,
            Error::AssumptionI { .. } | Error::AssumptionIII { .. } => ErrorClass::Assumption,
            Error::Resolution { .. }
            | Error::NoSignChange { .. }
            | Error::Classification { .. }
            | Error::Numeric(_) => ErrorClass::Numeric,
        }
    }
}
