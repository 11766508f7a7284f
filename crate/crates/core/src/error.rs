use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A stencil, chart or trajectory left the region where it is defined.
    #[error("range error: {0}")]
    Range(String),
    #[error("precision error: {0}")]
    Precision(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("mesh quality error: {0}")]
    MeshQuality(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::Precision(_) => 3,
            _ => 2,
        }
    }
}
