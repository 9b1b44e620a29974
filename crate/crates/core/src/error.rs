use thiserror::Error;

/// Errors raised by the simulation and checking routines.
///
/// Check *failures* are not errors: they come back as verdicts inside the
/// report types. Variants here mean an operation could not produce a result.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("kernel is not normalizable on this grid: captured mass {mass:.6} < 0.99")]
    NonNormalizable { mass: f64 },

    #[error("grid extent {extent} is smaller than 20x the kernel scale {scale}")]
    DomainTooSmall { extent: f64, scale: f64 },

    #[error("truncation to radius {radius} leaves no kernel weight")]
    EmptyTruncation { radius: f64 },

    #[error("no root of G(r) = beta bracketed in (0, {r_max}]")]
    NoRoot { r_max: f64 },

    #[error("Picard iteration did not converge in {max_iter} iterations (dt = {dt:e}, residual {residual:e})")]
    NoConvergence { max_iter: usize, dt: f64, residual: f64 },

    #[error("profile domain exceeded: need |s + c| + radius <= {limit}, got {needed}")]
    DomainExceeded { needed: f64, limit: f64 },

    #[error("Weinberger iteration did not stall within {n_max} iterations")]
    NoStall { n_max: usize },

    #[error("could not bracket the spreading speed within [{lo}, {hi}]")]
    BracketNotFound { lo: f64, hi: f64 },

    #[error("kernel has no nondegeneracy radius on this grid")]
    NoNondegeneracy,

    #[error("no validity time T <= {t_cap} certifies the sub-solution (best max {best_max:e})")]
    NotASubsolution { t_cap: f64, best_max: f64 },

    #[error("amplitude q = {q} is not below the cap q0 = {q0}")]
    QTooLarge { q: f64, q0: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFail(String),

    #[error("window at time {time} reaches within {distance:.3} of the torus seam (needs {required:.3})")]
    SeamViolation { time: f64, distance: f64, required: f64 },

    #[error("field has no crossing of level {level}")]
    NoCrossing { level: f64 },

    #[error("iteration cap {cap} reached before the target was met")]
    IterationCap { cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
