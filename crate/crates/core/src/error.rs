use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate triangle {index}: area {area:e} below threshold {threshold:e}")]
    DegenerateTriangle {
        index: usize,
        area: f64,
        threshold: f64,
    },

    #[error("discrete space has no free degrees of freedom")]
    NoFreeDofs,

    #[error("matrix is not positive definite: pivot {value:e} at index {index}")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("requested {k} eigenpairs from a system of dimension {n}")]
    TooManyEigenpairs { k: usize, n: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residuals {residuals:?})")]
    NotConverged {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("conjugate gradients stalled after {iterations} iterations at relative residual {residual:e}")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("dense oracle limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("reference function b-norm {0} is outside [1 - 1e-6, 1 + 1e-6]")]
    Normalization(f64),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {needed} rows with positive estimator, found {found}")]
    InsufficientRows { needed: usize, found: usize },

    #[error("adaptive iteration {iteration} failed: {source}")]
    Adaptive {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
