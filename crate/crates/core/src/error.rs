use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("stability index alpha must lie in (1, 2), got {0}")]
    AlphaOutOfRange(f64),
    #[error("gamma-function pole at alpha = {0}")]
    GammaPole(f64),
    #[error("epsilon must lie in (0, 1], got {0}")]
    EpsilonOutOfRange(f64),
    #[error("rho = {rho} outside the spectral gap ({lo}, {hi})")]
    RhoOutsideGap { rho: f64, lo: f64, hi: f64 },
    #[error("negative semigroup time t = {0}")]
    NegativeTime(f64),
    #[error("coefficient length {got} does not match space dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("field blew up: |u|_theta = {norm} exceeds cap {cap} at slow time {t}")]
    Blowup { norm: f64, cap: f64, t: f64 },
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("time grids do not match: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
