use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("transition matrix has an empty {axis} at index {index}")]
    EmptyRowOrColumn { axis: &'static str, index: usize },

    #[error("transition matrix is not irreducible and aperiodic: A^p has a zero entry for every p up to {power}")]
    NotIrreducibleAperiodic { power: usize },

    #[error("word {word:?} is not admissible")]
    InadmissibleWord { word: Vec<u8> },

    #[error("word of length {len} is too short, need at least {needed} symbols")]
    WordTooShort { len: usize, needed: usize },

    #[error("potentials live on different subshifts")]
    SpecMismatch,

    #[error("frequency |b| = {0} must be at least 1")]
    BadFrequency(f64),

    #[error("power iteration did not converge in {max_iters} iterations (residual {residual:e})")]
    NoConvergence { max_iters: usize, residual: f64 },

    #[error("normalized operator fails L1 = 1: deviation {deviation:e} exceeds {bound:e}")]
    NormalizationFailed { deviation: f64, bound: f64 },

    #[error("Gibbs chain is not stationary: deviation {0:e}")]
    NotStationary(f64),

    #[error("could not bracket a root: {0}")]
    BracketFailure(String),

    #[error("target average {a} is outside the achievable interval ({lo}, {hi})")]
    OutOfRange { a: f64, lo: f64, hi: f64 },

    #[error("observable is lattice-degenerate: beta'' = {0:e} at the root")]
    LatticeDegenerate(f64),

    #[error("enumeration of {count} cylinders exceeds the guard of {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("quadrature under-resolved: relative change {change:e} exceeds {tol:e}")]
    QuadratureUnderresolved { change: f64, tol: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NormalizationFailed { .. }
                | Error::NotStationary(_)
                | Error::BracketFailure(_)
                | Error::LatticeDegenerate(_)
                | Error::QuadratureUnderresolved { .. }
                | Error::NonFinite(_)
                | Error::OutOfRange { .. }
        )
    }
}
