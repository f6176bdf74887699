use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown domain kind `{0}` (expected interval, square, circle or torus2)")]
    UnknownDomain(String),

    #[error("spectral cutoff {cutoff} too small for t = {t}: truncation tail {tail:.3e} exceeds {tolerance:.1e}")]
    CutoffInsufficient {
        cutoff: usize,
        t: f64,
        tail: f64,
        tolerance: f64,
    },

    #[error("energy sum diverges at t = 0 in dimension {0}")]
    DivergentAtZero(usize),

    #[error("series truncation did not converge: tail bound {tail:.3e} at k = {k}")]
    NonconvergentTruncation { k: usize, tail: f64 },

    #[error("constant mode is nonzero ({0:.3e}); Poisson problem has no zero-mean solution")]
    ZeroEigenvalueDivision(f64),

    #[error("grid size {grid_size} aliases spectral cutoff {cutoff}; need at least {required}")]
    AliasingRisk {
        grid_size: usize,
        cutoff: usize,
        required: usize,
    },

    #[error("density is negative ({min:.3e}) below the truncation-noise floor")]
    NonpositiveDensity { min: f64 },

    #[error("grid too coarse: certified slack {slack:.3e} exceeds {tolerance:.1e}; use grid_size >= {required}")]
    GridTooCoarse {
        slack: f64,
        tolerance: f64,
        required: usize,
    },

    #[error("sigma {sigma:.3e} risks underflow for oscillation {oscillation:.3e}")]
    UnderflowRisk { sigma: f64, oscillation: f64 },

    #[error("event precondition violated: sup |u - 1| = {sup:.3e} > eta = {eta:.3e}")]
    EventViolated { sup: f64, eta: f64 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("domain mismatch: {0} vs {1}")]
    DomainMismatch(String, String),

    #[error("non-finite cost at ({0}, {1})")]
    NonfiniteCost(usize, usize),

    #[error("quantization: {0}")]
    Quantization(String),

    #[error("support mismatch between mixture components")]
    SupportMismatch,

    #[error("grid mismatch across trials")]
    GridMismatch,

    #[error("optimality certificate failed: {0}")]
    Certificate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
