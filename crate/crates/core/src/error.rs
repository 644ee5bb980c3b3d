use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("table length {0} is not a power of two of at least {1}")]
    BadLength(usize, usize),
    #[error("width {0} is outside the supported range {1}..={2}")]
    BadWidth(u32, u32, u32),
    #[error("output value {value} at input {index} does not fit in {bits} bits")]
    ValueOutOfRange { index: usize, value: u64, bits: u32 },
    #[error("cannot parse token `{0}` as a non-negative integer")]
    BadToken(String),
    #[error("matrix is not invertible")]
    NotInvertible,
    #[error("basis vectors are zero or linearly dependent")]
    DependentVectors,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("swap positions must differ (got {0} twice)")]
    SameIndex(usize),
    #[error("index {0} out of range for a table of {1} entries")]
    IndexOutOfRange(usize, usize),
    #[error("S-box is not bijective")]
    NotBijective,
    #[error("S-box does not satisfy the move filter at input {0}")]
    FilterViolation(usize),
    #[error("polynomial {0:#x} is not irreducible of degree {1}")]
    ReduciblePolynomial(u32, u32),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("selection impossible: total fitness is zero")]
    DegeneratePopulation,
    #[error("normalization stage `{stage}` failed: {reason}")]
    Normalization { stage: &'static str, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
