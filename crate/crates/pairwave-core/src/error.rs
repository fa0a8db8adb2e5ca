use thiserror::Error;

/// Failure modes shared by every solver stage.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{stage} did not converge after {iterations} iterations (last residual {residual:e})")]
    ConvergenceFailure {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("gap condition violated: estimate {c_estimate:e}, certificate {certificate:e}")]
    GapConditionViolated { c_estimate: f64, certificate: f64 },

    #[error("per-mode gap violated: h_ee = {h_ee:e}, |f_ee| = {f_abs:e}")]
    PerModeGapViolated { h_ee: f64, f_abs: f64 },

    #[error("kernel outside the open unit ball: operator norm {op_norm:e}")]
    OutOfDomain { op_norm: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("degeneracy beyond tolerance: {0}")]
    Degeneracy(String),

    #[error("resonant denominator {denominator:e} in eigenvector construction")]
    Resonance { denominator: f64 },

    #[error("Fock dimension {dim} exceeds cap {cap}")]
    SizeCap { dim: usize, cap: usize },

    #[error("mode {index} is unpaired and has no outer Riccati root")]
    UnpairedMode { index: usize },

    #[error("invalid mode index {index} (valid range 0..{len})")]
    InvalidIndex { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
