use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid has {n} samples, at least {min} required")]
    GridTooSmall { n: usize, min: usize },

    #[error("balance gives |S(0)|^2 = {s0_sq} < 1, efficiency would exceed one")]
    EfficiencyAboveOne { s0_sq: f64 },

    #[error("control amplitude exceeds cap on {fraction:.3} of the grid (limit 0.01)")]
    ControlCapExceeded { fraction: f64 },

    #[error("propagator determinant collapsed to {det:e} at t = {t:e}")]
    SingularPropagator { det: f64, t: f64 },

    #[error("grid too coarse for the luminescence beat: {per_period:.1} samples per period, need {required}")]
    GridTooCoarse { per_period: f64, required: usize },

    #[error("inputs defined on different grids ({left} vs {right} samples)")]
    GridMismatch { left: usize, right: usize },

    #[error("four-wave-mixing power came out negative ({value:e})")]
    NegativePower { value: f64 },

    #[error("normal-ordered spin excess {0} is below the physical bound -1")]
    UnphysicalExcess(f64),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
