use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// Cholesky pivot at `pivot` (0-based) fell below the rejection tolerance.
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("solver setup failed: {0}")]
    Setup(Box<Error>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// A cached factorization or threshold matrix no longer matches the penalty state.
    #[error("stale cache: built for penalty version {cached}, state is at {current}")]
    StaleCache { cached: u64, current: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for a factorization rejected as singular, bare or wrapped as a setup error.
    pub fn is_singular(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. } => true,
            Error::Setup(inner) => inner.is_singular(),
            _ => false,
        }
    }
}

pub(crate) fn shape(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}

pub(crate) fn check_shape(
    context: &'static str,
    expected: (usize, usize),
    found: (usize, usize),
) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected: shape(expected.0, expected.1),
            found: shape(found.0, found.1),
        })
    }
}
