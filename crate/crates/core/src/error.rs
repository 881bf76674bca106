use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    #[error("mesh validation failed: {0}")]
    MeshValidation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("degenerate triangle {triangle} (signed area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    ObstacleSolve(Box<ObstacleSolveError>),

    #[error("{variant} optimization stopped at evaluation {evaluation}: {source}")]
    Optimization {
        variant: String,
        evaluation: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Failures of the numerics, as opposed to bad input or i/o.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Io { .. } => false,
            Error::Optimization { source, .. } => source.is_numerical(),
            _ => true,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Why an obstacle solve gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveFailure {
    IterationCap,
    Cycling,
    NotConverged,
}

/// Failure of an obstacle solve, with the last iterate and its residuals.
#[derive(Debug, Clone, thiserror::Error)]
#[error(
    "obstacle solve failed ({reason:?}) after {iterations} iterations: \
     kkt residual {kkt_residual:e}"
)]
pub struct ObstacleSolveError {
    pub reason: SolveFailure,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub last_iterate: Vec<f64>,
}

impl From<ObstacleSolveError> for Error {
    fn from(e: ObstacleSolveError) -> Self {
        Error::ObstacleSolve(Box::new(e))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
