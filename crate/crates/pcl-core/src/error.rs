use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors surfaced by estimation, feature, and data-generation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Caller-supplied shapes, counts, or options do not line up.
    InvalidArgument(String),
    /// SPD factorization failed after jitter escalation, or no attempt met
    /// the residual gate.
    SingularMatrix,
    /// All points coincide: the median pairwise distance would be zero.
    DegenerateBandwidth,
    /// A loss or intermediate value turned NaN/Inf outside a training loop.
    NonFinite { context: &'static str },
    /// Training aborted on a non-finite loss. Carries the outer iteration
    /// index and the stage-2 loss trace up to the failure.
    Diverged { iteration: usize, trace: Vec<f64> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SingularMatrix => write!(f, "matrix is singular or not positive definite"),
            Error::DegenerateBandwidth => {
                write!(f, "degenerate bandwidth: all points are identical")
            }
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::Diverged { iteration, .. } => {
                write!(f, "training diverged at outer iteration {iteration}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl fmt::Display) -> Error {
    Error::InvalidArgument(alloc::format!("{msg}"))
}
