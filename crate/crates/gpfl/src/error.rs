use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("{what} contains a non-finite value")]
    NonFinite { what: String },

    #[error("invalid {what}: {detail}")]
    Invalid { what: String, detail: String },

    #[error("mass matrix is not positive definite")]
    SingularDynamics,

    #[error(
        "kernel matrix is not positive definite even with {jitter:.1e} diagonal jitter \
         (smallest-eigenvalue bound {min_eigen_estimate:.3e})"
    )]
    IllConditionedKernel {
        jitter: f64,
        /// Gershgorin lower bound on the smallest eigenvalue.
        min_eigen_estimate: f64,
    },

    #[error("hyperparameter search failed: {0}")]
    OptimizationFailed(String),

    #[error("nMSE undefined: target variance is zero")]
    UndefinedMetric,

    #[error("controller produced a non-finite torque at step {step}")]
    ControllerFault { step: usize },

    #[error("simulation diverged at t = {time:.3} s (|q| exceeded {limit:.0e})")]
    Divergence {
        time: f64,
        limit: f64,
        /// Trajectory up to the step that diverged.
        log: Box<crate::sim::TrajectoryLog>,
    },

    #[error("torque collapse at t = {time:.3} s while tracking error exceeded {error_deg:.1} deg")]
    Degradation { time: f64, error_deg: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
