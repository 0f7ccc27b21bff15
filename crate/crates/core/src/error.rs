use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("tweezer site {site} is outside the {n_ions}-ion array")]
    TweezerOutOfRange { site: usize, n_ions: usize },

    #[error("tweezer site {site} appears more than once")]
    DuplicateTweezer { site: usize },

    #[error("tweezered sites {tweezered:?} do not coincide with the wall sites {walls:?}")]
    MisalignedTweezers {
        tweezered: Vec<usize>,
        walls: Vec<usize>,
    },

    #[error("cavity block [{start}, {end}) does not fit inside an array of {n_ions} ions")]
    CavityOutOfRange {
        start: isize,
        end: isize,
        n_ions: usize,
    },

    #[error("bath has {n_bath} ions but a {n_cavity}-site cavity needs at least {required}")]
    InsufficientBath {
        n_bath: usize,
        n_cavity: usize,
        required: usize,
    },

    #[error("walls indistinct: {0}")]
    WallsIndistinct(String),

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("coarse-graining window {window:.3e} is narrower than the mean bath level spacing {spacing:.3e}")]
    WindowTooNarrow { window: f64, spacing: f64 },

    #[error(
        "only {found} bath modes within window {window:.3e} of omega = {omega:.4}; \
         use a wider window or a longer crystal (need at least {required})"
    )]
    SparseWindow {
        omega: f64,
        window: f64,
        found: usize,
        required: usize,
    },

    #[error("truncation at n_max = {n_max} is inadequate (tail mass {tail:.3e})")]
    Truncation { n_max: usize, tail: f64 },

    #[error("no steady state: {0}")]
    NoSteadyState(String),

    #[error("second-order coherence is undefined for an empty mode")]
    UndefinedCoherence,

    #[error("moment closure broke down at t = {t:.3}: {what}")]
    ClosureBreakdown { t: f64, what: String },

    #[error("integration failed at t = {t:.3}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("no oscillation above the noise floor")]
    NoOscillation,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be non-negative and finite, got {value}")))
    }
}
