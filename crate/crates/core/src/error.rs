use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("time {t} is not a point of the grid")]
    OffGrid { t: f64 },

    #[error("zero-norm vector supplied as {0}")]
    ZeroVector(&'static str),

    #[error("vector {what} is not normalized (norm = {norm})")]
    NotNormalized { what: &'static str, norm: f64 },

    #[error("frame is not unitary at t = {t} (deviation {deviation:e})")]
    NonUnitaryFrame { t: f64, deviation: f64 },

    #[error("operator is not Hermitian at t = {t} (deviation {deviation:e})")]
    NotHermitian { t: f64, deviation: f64 },

    #[error("propagator requested backwards in time (s = {s} > t = {t})")]
    BackwardsInterval { s: f64, t: f64 },

    #[error("amplitude grew to {magnitude} at t = {t}; inputs are unstable")]
    Unstable { t: f64, magnitude: f64 },

    #[error("kernel grid has {points} points, above the limit of {limit}")]
    KernelTooLarge { points: usize, limit: usize },

    #[error("level crossing: gap {gap:e} below threshold {threshold:e} at t = {t}")]
    LevelCrossing { t: f64, gap: f64, threshold: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
