use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field does not belong to this grid")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate evaluation at quadrature point {quad}: zero gradient with eps = 0")]
    DegenerateEvaluation { quad: usize },
    #[error("matrix not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("singular matrix (zero pivot at {pivot})")]
    SingularMatrix { pivot: usize },
    #[error("growth condition violated: |f({y})| = {fy} exceeds {bound}")]
    GrowthViolation { y: f64, fy: f64, bound: f64 },
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
