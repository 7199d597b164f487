use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants split into two families that the CLI maps onto different exit
/// codes: domain errors (bad inputs, failed numerical certification) and
/// resource errors (budgets, I/O).
#[derive(Debug, Error)]
pub enum KwrError {
    #[error("unsupported dimension d={0} (supported: 1, 2, 3)")]
    UnsupportedDimension(u32),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("accuracy target unattainable for order {order} at argument {arg}")]
    Accuracy { order: f64, arg: f64 },

    #[error("quadrature did not converge: {reason} (partial value {partial}, last increment {last_increment:e})")]
    Convergence {
        reason: String,
        partial: f64,
        last_increment: f64,
    },

    #[error("step size underflow at tau={tau}: dtau={dtau:e} below minimum (offending node {node})")]
    StepUnderflow { tau: f64, dtau: f64, node: usize },

    #[error("time step too large: {0}")]
    StepSize(String),

    #[error("extrapolation unstable: {0}")]
    Extrapolation(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("kernel table mismatch: {0}")]
    TableMismatch(String),

    #[error("spectral truncation: {0}")]
    Truncation(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl KwrError {
    pub fn domain(msg: impl Into<String>) -> Self {
        KwrError::Domain(msg.into())
    }

    /// True for errors caused by exhausted budgets or the environment rather
    /// than by the requested computation itself.
    pub fn is_resource(&self) -> bool {
        matches!(self, KwrError::Resource(_) | KwrError::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, KwrError>;
