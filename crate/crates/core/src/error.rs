use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("feature of width {width} is resolved by only {points:.2} grid points (need >= 4)")]
    UnderResolved { width: f64, points: f64 },

    #[error("wavepacket tail clipped by the domain boundary along {axis}")]
    PacketClipped { axis: &'static str },

    #[error("orbitals are (nearly) parallel: |<1|2>| = {overlap}")]
    ParallelOrbitals { overlap: f64 },

    #[error("negative density {value} at grid index {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("time step {dt} violates the stability bound {bound}")]
    StabilityViolated { dt: f64, bound: f64 },

    #[error("time {t} is outside the provider validity window [{start}, {end}]")]
    OutsideValidity { t: f64, start: f64, end: f64 },

    #[error("momentum {k} lies outside the grid range +/-{k_max}")]
    MomentumOutOfRange { k: f64, k_max: f64 },

    #[error("invalid spin configuration: {0}")]
    SpinConfiguration(String),

    #[error("expected {expected} orbitals, found {found}")]
    OrbitalCount { expected: usize, found: usize },

    #[error("spectrum error: {0}")]
    Spectrum(String),

    #[error("no comb peaks detected in the requested band")]
    NoPeaks,

    #[error("container error: {0}")]
    Container(String),

    #[error("integrity check failed for dataset `{dataset}`: {reason}")]
    Integrity { dataset: String, reason: String },

    #[error("sink error: {0}")]
    Sink(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
