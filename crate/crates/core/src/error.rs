use thiserror::Error;

/// Errors produced by the construction and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{a} has no square root modulo {p}")]
    NoSquareRoot { a: i128, p: u64 },

    #[error("cannot lift square root {r} of {a} from mod {p} to mod {modulus}")]
    LiftFailure { r: u64, a: i128, p: u64, modulus: u64 },

    #[error("{a} is not invertible modulo {modulus}")]
    NotInvertible { a: u64, modulus: u64 },

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("invalid word: {0}")]
    InvalidWord(String),

    #[error("matrix is singular modulo {0}")]
    SingularMatrix(u64),

    #[error("invalid morphism: {0}")]
    InvalidMorphism(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("generator {0} is its own inverse, edge involution would have a fixed point")]
    InvolutionFixedPoint(usize),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("covering check failed at vertex {vertex}: {reason}")]
    CoveringFailed { vertex: usize, reason: String },

    #[error("word length {requested} exceeds cap {cap} ({words} reduced words would be enumerated)")]
    WordCapExceeded { requested: usize, cap: usize, words: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
