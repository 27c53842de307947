use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("vector of length {len} does not fit in {slots} slots")]
    VectorTooLong { len: usize, slots: usize },
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: usize, right: usize },
    #[error("scale mismatch: {left} vs {right}")]
    ScaleMismatch { left: f64, right: f64 },
    #[error("no multiplicative level left to consume")]
    LevelExhausted,
    #[error("no galois key for rotation step {0}")]
    MissingGaloisKey(usize),
    #[error("ciphertext and context disagree: {0}")]
    ContextMismatch(String),
    #[error("malformed encoding: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, HeError>;
