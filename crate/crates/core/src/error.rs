use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sinogram row {row} has non-positive sum {sum}")]
    DegenerateRow { row: usize, sum: f64 },
    #[error("reference segmentation projects to an all-zero sinogram")]
    DegenerateReference,
    #[error("image is constant; histogram has a single populated bin")]
    DegenerateHistogram,
    #[error("value not representable in encoding: {0}")]
    Encoding(String),
    #[error("model has {vars} variables, exceeding the enumeration cap of {cap}")]
    TooLarge { vars: usize, cap: usize },
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
