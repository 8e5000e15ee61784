use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} out of range for degree {degree}")]
    IndexOutOfRange { index: usize, degree: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not a permutation: {0}")]
    InvalidPermutation(String),

    #[error("group order exceeds cap of {cap} elements")]
    GroupTooLarge { cap: usize },

    #[error("degree {degree} too large (max {max})")]
    DegreeTooLarge { degree: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("state blew up at step {step} (|x|_inf = {norm:e})")]
    BlowUp { step: usize, norm: f64 },

    #[error("training diverged at iteration {iteration} (loss = {loss:e})")]
    Diverged { iteration: usize, loss: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, Error>;
