use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tail leak: boundary mass fraction {fraction:.3e} exceeds tolerance {tol:.1e}")]
    TailLeak { fraction: f64, tol: f64 },

    #[error("aliasing: top-octave spectral fraction {fraction:.3e} exceeds {tol:.1e}")]
    Aliasing { fraction: f64, tol: f64 },

    #[error("dyadic index {j} outside partition range [{j_min}, {j_max}]")]
    Range { j: i32, j_min: i32, j_max: i32 },

    #[error("dyadic truncation: boundary shells carry {fraction:.3e} of the Besov sum (limit {tol:.1e})")]
    Truncation { fraction: f64, tol: f64 },

    #[error("domain too small: no tail radius up to {r_limit} meets eps = {eps:.3e}")]
    DomainTooSmall { eps: f64, r_limit: f64 },

    #[error("numerical instability at step {step} (t = {t})")]
    Instability { step: u64, t: f64 },

    #[error("phase guard violated: dt * rho_max^2 = {value:.3} > {limit:.3}")]
    PhaseGuard { value: f64, limit: f64 },

    #[error("rescaling search exceeded 2^{max_exponent} without reaching delta = {delta}")]
    RescaleFailure { delta: f64, max_exponent: u32 },

    #[error("sampling stride unsuitable: {0}")]
    Stride(String),

    #[error("space-time norm pair (q_t = {q_t}, r_x = {r_x}, gradient = {gradient}) was not configured")]
    UnconfiguredNorm { q_t: f64, r_x: f64, gradient: bool },

    #[error("decomposition drifted at t = {t}: ||u - (v + w)|| / ||u|| = {residual:.3e}")]
    Inconsistent { t: f64, residual: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
