use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("complex dimension {0} outside the supported range 1..=3")]
    DimensionOutOfRange(usize),
    #[error("metric is not positive definite at node {node} (t = {t:?}, min eigenvalue {min_eig:e})")]
    NonPositiveMetric { node: usize, t: Vec<f64>, min_eig: f64 },
    #[error("field has {found} samples but the quadrature has {expected} nodes")]
    NodeMismatch { expected: usize, found: usize },
    #[error("{what} requires complex dimension at least {required}, model has {found}")]
    DegenerateDimension {
        what: &'static str,
        required: usize,
        found: usize,
    },
    #[error("density index j = {0} outside the implemented range")]
    OrderOutOfRange(usize),
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("gram matrix ill-conditioned (condition number {0:e}); raise the quadrature level or lower k")]
    IllConditioned(f64),
    #[error("gram matrix singular")]
    SingularGram,
    #[error("fit failure: {0}")]
    Fit(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("flow aborted: {0}")]
    FlowAborted(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
