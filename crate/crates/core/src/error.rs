//! Error type shared by all modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Bag size must divide the sample count exactly; there is no remainder
    /// handling because the theory assumes equally sized bags.
    #[error("bag size {k} does not divide sample count {n}")]
    Divisibility { n: usize, k: usize },

    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} = {value} is outside its valid domain ({domain})")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// The loss carries neither a second-derivative bound nor a convexity
    /// flag, so neither side of the loss-bound check can be evaluated.
    #[error("loss provides neither a second-derivative bound nor a convexity flag")]
    MissingBound,

    /// The assembled Gram system is numerically singular.
    #[error("gram matrix numerically singular: pivot {pivot:.3e} below threshold {threshold:.3e}")]
    SingularSystem { pivot: f64, threshold: f64 },

    /// The denominator of the bias expression is not positive at the solved
    /// fixed point; the asymptotic bias is undefined in this regime.
    #[error("bias denominator {value:.3e} is not positive at the solved fixed point")]
    DegenerateDenominator { value: f64 },

    /// The variance fixed point is not positive; the asymptotic variance
    /// diverges (for example the bag-level estimator with too few bags).
    #[error("variance fixed point v* = {v_star:.3e} is not positive; variance diverges")]
    DivergentVariance { v_star: f64 },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    /// Internal safeguard: a root search could not establish a sign change.
    #[error("no sign-change bracket for root search: {0}")]
    NoBracket(&'static str),
}
