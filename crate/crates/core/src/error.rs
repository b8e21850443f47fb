use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step size underflow at t = {time:.6e} s (h = {step:.3e} s)")]
    StepSizeUnderflow { time: f64, step: f64 },

    #[error("covariance overflow at period {period}")]
    Overflow { period: usize },

    #[error("no steady state: spectral radius of the period map is {spectral_radius:.12} (threshold exceeded)")]
    Unstable { spectral_radius: f64 },

    #[error("no amplification: {0}")]
    NotAmplifying(String),

    #[error("sweep does not bracket the half maximum on the {side} side")]
    NotBracketed { side: &'static str },

    #[error("nothing to convert: squeezed axis lies in a single mode")]
    SingleModeAxis,

    #[error("linear solve failed: {0}")]
    Singular(&'static str),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures caused by the numerics rather than the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::Overflow { .. }
                | Error::Unstable { .. }
                | Error::NotAmplifying(_)
                | Error::NotBracketed { .. }
                | Error::Singular(_)
        )
    }
}
