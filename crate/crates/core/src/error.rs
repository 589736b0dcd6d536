use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("undefined mean shape: {0}")]
    Shape(String),

    /// Adaptive quadrature ran out of subdivisions. Carries the partial
    /// estimate and its error bound.
    #[error("quadrature did not converge: value {value:e}, error estimate {err:e}")]
    Quadrature { value: f64, err: f64 },

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("root finding failed: {0}")]
    Solver(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Shape(_) => "shape",
            Error::Quadrature { .. } => "quadrature",
            Error::Consistency(_) => "consistency",
            Error::Solver(_) => "solver",
            Error::Dimension(_) => "dimension",
            Error::Estimation(_) => "estimation",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
