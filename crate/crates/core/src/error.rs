use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid control site {site} for a chain of {n} particles")]
    InvalidSite { site: usize, n: usize },

    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite state encountered at t = {time}")]
    NonFinite { time: f64 },

    #[error("step size underflow at t = {time} (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("function is not odd: coefficient of t^{degree} is {value}")]
    NotOdd { degree: usize, value: f64 },

    #[error("plane is not invariant: {0}")]
    NotInvariant(String),

    #[error("potential does not satisfy the growth condition")]
    NoGrowth,

    #[error("no point found within {epsilon} before t = {t_max} (best distance {best_distance} at t = {best_time})")]
    NotFound {
        epsilon: f64,
        t_max: f64,
        best_distance: f64,
        best_time: f64,
    },
}
