use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("degenerate orbit: {dropped} of {total} Lyapunov terms dropped")]
    DegenerateOrbit { dropped: u64, total: u64 },

    #[error("continued fraction lost precision after {depth_reached} quotients")]
    PrecisionExhausted { depth_reached: usize },

    #[error("pullback did not converge: residual {residual:e} > tolerance {tol:e}")]
    NotConverged { residual: f64, tol: f64 },

    #[error("no sign change of the chain defect on A0 (scanned {points} points)")]
    NoSignChange { points: usize },

    #[error("chain check failed: {0}")]
    ChainBroken(String),

    #[error("fit needs at least {needed} records with beta >= {beta_min}, got {got}")]
    InsufficientWindow { needed: usize, got: usize, beta_min: f64 },

    #[error("scale constants are vacuous at this lambda (K0 = {k0} < 10)")]
    VacuousScales { k0: u64 },

    #[error("no lambda candidate passed every lemma check")]
    NonePass,

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}
