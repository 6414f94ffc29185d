//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// A caller handed an argument that violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A coordinate lies outside the tabulated domain; profiles never
    /// extrapolate.
    #[error("{what} = {value:e} outside the domain [{min:e}, {max:e}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// An opacity combination makes a mean free path or an implicit solve
    /// undefined (non-positive denominator).
    #[error("singular opacity: {0}")]
    SingularOpacity(String),

    /// A scattering kernel table is malformed (wrong shape, asymmetric, or
    /// non-finite entries).
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    /// An explicit step would violate the stability bound; retry with the
    /// suggested step size.
    #[error("step rejected: dt = {dt:e} exceeds the stability bound; suggested dt = {suggested:e}")]
    StepRejected { dt: f64, suggested: f64 },

    /// A scenario file failed to parse; `line` is 1-based.
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
