use thiserror::Error;

/// Errors surfaced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum GmsError {
    /// Invalid model or distribution configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Mismatched point shapes or incompatible spaces.
    #[error("shape error: {0}")]
    Shape(String),

    /// Operation not defined on the given space (e.g. midpoint on a matrix space).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Kernel called with a tuple of the wrong length.
    #[error("arity error: kernel {kernel} expects {expected} pairs, got {got}")]
    Arity {
        kernel: u8,
        expected: usize,
        got: usize,
    },

    /// The U-statistic denominator is (numerically) zero: the output is
    /// (nearly) T-constant and the index is undefined.
    #[error("degenerate variance: output is (nearly) T-constant (|denominator| = {denominator:.3e} <= {threshold:.3e})")]
    DegenerateVariance { denominator: f64, threshold: f64 },

    /// Exact tuple enumeration would exceed the configured cap.
    #[error("exact mode would enumerate {tuples} tuples (cap {cap}); use factorized or incomplete mode")]
    TupleCountExceeded { tuples: f64, cap: f64 },

    /// Black-box evaluator failed on a sampled point.
    #[error("evaluator failure at row {row}: {message}")]
    Evaluator { row: usize, message: String },

    /// Precondition violation on an operation argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Too many degenerate bootstrap replicates to form an interval.
    #[error("bootstrap failed: {dropped} of {total} replicates degenerate (> 20% limit)")]
    BootstrapDegenerate { dropped: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, GmsError>;
