use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// One of the standing assumptions (A1)-(A3) on the coefficients or the
    /// boundary operator does not hold.
    #[error("assumption {assumption} violated: {detail}")]
    Assumption {
        assumption: &'static str,
        detail: String,
    },

    /// Local impedance problem numerically singular, i.e. (A4) fails.
    #[error(
        "assumption (A4) violated: local problem of block {block} is numerically singular \
         (rcond = {rcond:.3e}); perturb kappa or gamma slightly"
    )]
    LocalSolvability { block: usize, rcond: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("dense analysis cap exceeded: dimension {dim} > cap {cap}")]
    CapExceeded { dim: usize, cap: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::LocalSolvability { .. } => 3,
            Error::Mesh(_)
            | Error::Partition(_)
            | Error::Config(_)
            | Error::Assumption { .. }
            | Error::Dimension(_)
            | Error::CapExceeded { .. } => 2,
            Error::Linalg(_) | Error::Solver(_) | Error::Io(_) => 1,
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
