use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid combination of model parameters (e.g. r != 0 without a Planck scale).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural constraint on the Hilbert space was violated.
    #[error("constraint violation: {0}")]
    Constraint(String),

    /// A certificate check failed after the computation.
    #[error("{module}: numerical failure ({certificate}): {detail}")]
    Numerical {
        module: &'static str,
        certificate: &'static str,
        detail: String,
    },

    /// Adjacent sweep points too far apart for overlap tracking.
    #[error("sweep_scaling: tracking step too large between r={r_prev} and r={r_next} (min overlap {min_overlap:.3})")]
    StepTooLarge {
        r_prev: f64,
        r_next: f64,
        min_overlap: f64,
    },

    #[error("sweep_scaling: fit error: {0}")]
    Fit(String),

    /// Every problem found while validating a run specification.
    #[error("invalid run specification:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status: 2 for usage and configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Constraint(_) | Error::Invalid(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn numerical(
        module: &'static str,
        certificate: &'static str,
        detail: impl Into<String>,
    ) -> Self {
        Error::Numerical {
            module,
            certificate,
            detail: detail.into(),
        }
    }
}
