use thiserror::Error;

/// Errors raised by the link model, the optimizer and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("UAV coincides with a ground user (hop radicand {radicand:e} is not positive)")]
    DegenerateGeometry { radicand: f64 },

    #[error("trajectory has no waypoints")]
    EmptyTrajectory,

    #[error("rate sequence needs at least two slots, got {0}")]
    TooFewSlots(usize),

    #[error("bit time must be positive, got {0}")]
    NonPositiveBitTime(f64),

    #[error("allocation is not an interior point of the simplex")]
    BoundaryPoint,

    #[error("zero allocation: {0}")]
    ZeroAllocation(&'static str),

    #[error("non-finite intermediate value in {0}")]
    NonFinite(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure(
    cond: bool,
    name: &'static str,
    reason: impl FnOnce() -> String,
) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason(),
        })
    }
}
