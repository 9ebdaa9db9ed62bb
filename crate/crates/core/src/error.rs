use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed scenario document: {0}")]
    Malformed(#[from] serde_json::Error),

    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("topology is disconnected: device {isolated} is unreachable from device 0")]
    Disconnected { isolated: usize },

    #[error("edge ({a}, {b}) references a device outside [0, {n})")]
    EdgeOutOfRange { a: usize, b: usize, n: usize },

    #[error("edge ({0}, {0}) is a self-loop")]
    SelfLoop(usize),

    #[error("device index {index} out of range for {n} devices")]
    DeviceOutOfRange { index: usize, n: usize },

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("x = {x} lies outside the logarithm domain x > {bound}")]
    Domain { x: f64, bound: f64 },

    #[error("demand list is empty")]
    EmptyDemands,

    #[error("demand {index} is negative or not finite: {value}")]
    InvalidDemand { index: usize, value: f64 },

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("device count must be at least 1")]
    NoDevices,

    #[error("non-finite value at iteration {iteration}, device {device}")]
    NonFinite { iteration: usize, device: usize },

    #[error(
        "residuals grew for {window} consecutive iterations (stopped at iteration {iteration}); \
         reduce eta and mu"
    )]
    Diverged { iteration: usize, window: usize },

    #[error("multiplier bracket could not be established: {0}")]
    Bracket(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the arithmetic itself rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::Diverged { .. } | Error::Bracket(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
