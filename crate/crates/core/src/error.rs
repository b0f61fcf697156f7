use thiserror::Error;

/// Failures raised by the physics modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("steady state is not unique: kernel dimension {dimension}")]
    DegenerateKernel { dimension: usize },

    #[error("{operation}: Liouvillian is singular on the traceless subspace (smallest singular value {value:e})")]
    Singular { operation: &'static str, value: f64 },

    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("quadrature did not converge: doubling nodes changed the result by {change:e} (relative)")]
    QuadratureNotConverged { change: f64 },

    #[error("grid resolution violation: {0}")]
    Resolution(String),

    #[error("{operation}: {detail}")]
    Instability { operation: &'static str, detail: String },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
