use thiserror::Error;

/// Errors produced by the learners, solvers and file readers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument: out-of-range index, dimension mismatch, bad budget.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver hit its iteration cap before reaching tolerance.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Malformed input file. Line and column are 1-based; 0 means unknown.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A Monte Carlo trial failed; the trial seed lets the run be replayed.
    #[error("trial {trial} (seed {seed:#018x}) failed: {source}")]
    Trial {
        trial: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True when the root cause is numerical non-convergence.
    pub fn is_not_converged(&self) -> bool {
        match self {
            Error::NotConverged { .. } => true,
            Error::Trial { source, .. } => source.is_not_converged(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
