use thiserror::Error;

/// Errors raised by the simulator building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("out of field of view: angle {angle:.4} rad from boresight")]
    OutOfFieldOfView { angle: f64 },

    #[error("no received signal")]
    NoReceivedSignal,

    #[error("no residual signal outside the deflation basis")]
    NoResidualSignal,

    #[error("underdetermined: {0} usable bearing(s), at least 2 required")]
    Underdetermined(usize),

    #[error("degenerate geometry: all bearing lines are parallel")]
    DegenerateGeometry,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("polynomial {taps:#x} is not primitive for register length {register_len}")]
    NotPrimitive { register_len: u32, taps: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
