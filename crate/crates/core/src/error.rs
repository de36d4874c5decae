use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value outside the operation's domain: {0}")]
    Domain(String),

    #[error("retraction undefined: entry ({row}, {col}) of X + Z is zero")]
    DegenerateRetraction { row: usize, col: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("linear system is singular")]
    Singular,

    #[error("exhaustive search over {size} hypotheses exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },
}

pub(crate) fn shape_err(expected: (usize, usize), got: (usize, usize)) -> Error {
    Error::Shape {
        expected: format!("{}x{}", expected.0, expected.1),
        got: format!("{}x{}", got.0, got.1),
    }
}
