use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular configuration (det = {det:e})")]
    SingularConfiguration { det: f64 },
    #[error("metric is not symmetric positive definite: {0}")]
    NonPositiveMetric(String),
    #[error("negative orientation (volume ratio {0:e})")]
    NegativeOrientation(f64),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("singular inertia: {0}")]
    SingularInertia(String),
    #[error("degenerate invariant spectrum (gap {gap:e}); a continuity hint is required")]
    DegenerateSpectrum { gap: f64 },
    #[error("coincident invariants q[{a}] and q[{b}] (gap {gap:e})")]
    CoincidentInvariants { a: usize, b: usize, gap: f64 },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("approaching a singular configuration at t = {t} (det ratio {ratio:e})")]
    SingularityApproach { t: f64, ratio: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
