use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid vertex conditions: {0}")]
    Conditions(String),

    #[error("invalid boundary map at sample {index} (y = {y}): {reason}")]
    MapSample { index: usize, y: f64, reason: String },

    #[error("invalid boundary map: {0}")]
    Map(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("lapack: {0}")]
    Lapack(#[from] ndarray_linalg::error::LinalgError),
}

impl Error {
    /// Failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Lapack(_))
    }
}
