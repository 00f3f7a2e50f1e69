use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("brute-force oracle refused: n = {n} exceeds the guard limit {limit}")]
    OracleGuard { n: usize, limit: usize },

    #[error("radius calibration failed: target mean degree {target} unreachable; achieved [{lo_degree}, {hi_degree}] over R in [{lo_r}, {hi_r}]")]
    Calibration {
        target: f64,
        lo_r: f64,
        hi_r: f64,
        lo_degree: f64,
        hi_degree: f64,
    },

    #[error("unrankable sample: all ground-truth scores are tied")]
    Unrankable,

    #[error("insufficient tail: {found} degrees >= k_min = {k_min}, need at least {need}")]
    InsufficientTail {
        found: usize,
        k_min: usize,
        need: usize,
    },

    #[error("degenerate tail: all tail degrees equal; exponent estimate is unbounded")]
    DegenerateTail,

    #[error("undefined result: {0}")]
    Undefined(&'static str),

    #[error("non-finite gradient in tensor `{tensor}` at index {index} (value {value})")]
    NonFiniteGradient {
        tensor: String,
        index: usize,
        value: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
