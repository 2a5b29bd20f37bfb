use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("point {point} outside grid support [{lo}, {hi}]")]
    Extrapolation { point: f64, lo: f64, hi: f64 },

    #[error("decay gate failed: tail bound {tail_bound:.3e} exceeds {limit:.1e}")]
    DecayGate { tail_bound: f64, limit: f64 },

    #[error("unitarity residual {residual:.3e} at z = {z}")]
    Unitarity { residual: f64, z: f64 },

    #[error("reflection coefficient sup {rho} is not below 1")]
    RhoNotBelowOne { rho: f64 },

    #[error("Nyquist violation at x = {x}, t = {t}: need N_z >= {required}, have {available}")]
    Nyquist {
        x: f64,
        t: f64,
        required: usize,
        available: usize,
    },

    #[error("solver did not converge after {iterations} iterations, residual {residual:.3e}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("solve failed at x = {x}: {source}")]
    AtPosition {
        x: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("reality check failed: max imaginary part {0:.3e}")]
    Reality(f64),

    #[error("gate violation: {0}")]
    Gate(String),

    #[error("CFL violation: dt = {dt} exceeds {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("boundary contamination {level:.3e} exceeds {limit:.1e} at t = {t}")]
    Boundary { level: f64, limit: f64, t: f64 },

    #[error("integration blew up at s = {0}")]
    BlowUp(f64),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
