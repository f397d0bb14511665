use thiserror::Error;

/// Errors surfaced by the numerical kernel and the higher layers built on it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature failure: error estimate {error:.3e} above tolerance after {refinements} refinements (partial estimate {estimate:.17e})")]
    QuadratureFailure {
        estimate: f64,
        error: f64,
        refinements: u32,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("limit not detected at {at} (last extrapolant {last:.6e}, spread {spread:.3e})")]
    LimitNotDetected { at: f64, last: f64, spread: f64 },

    #[error("invalid interval: lo={lo}, hi={hi}")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid tolerance: abs_tol and rel_tol are both zero")]
    InvalidTolerance,

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("invalid probability {0}: must lie in (0,1)")]
    InvalidProbability(f64),

    #[error("invalid power: n must be >= 1")]
    InvalidPower,

    #[error("no norming known for this law")]
    NoNormingKnown,

    #[error("degenerate power: distribution never exceeds 1 - 1/n")]
    DegeneratePower,

    #[error("hypotheses violated: {condition}: {detail}")]
    HypothesesViolated { condition: String, detail: String },

    #[error("profile does not factor as claimed: {0}")]
    FactorizationMismatch(String),

    #[error("no density available for this distribution function")]
    NoDensity,

    #[error("requires n >= 2, got {0}")]
    NeedsAtLeastTwo(u64),

    #[error("invalid tabulated cdf: {0}")]
    InvalidTabulated(String),
}

pub type Result<T> = std::result::Result<T, Error>;
