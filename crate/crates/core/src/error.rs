use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("multi-index {index:?} out of range for degree {degree}")]
    IndexOutOfRange { index: Vec<u32>, degree: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("covariance is not positive semidefinite")]
    NotPsd,

    #[error("input is empty")]
    EmptyData,

    #[error("need moments up to order {needed}, got {got}")]
    InsufficientOrder { needed: usize, got: usize },

    #[error("outside the supported envelope: {0}")]
    Envelope(String),

    #[error("all principal third cumulants vanish; a symmetric mixture is not recoverable this way")]
    SymmetricMixture,

    #[error("moments are inconsistent with the model: {0}")]
    InconsistentMoments(String),

    #[error("moment matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::Precondition(_) => "PRECONDITION",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::InvalidParams(_) => "INVALID_PARAMS",
            Error::NotPsd => "NOT_PSD",
            Error::EmptyData => "INPUT_EMPTY",
            Error::InsufficientOrder { .. } => "INSUFFICIENT_ORDER",
            Error::Envelope(_) => "ENVELOPE_EXCEEDED",
            Error::SymmetricMixture => "SYMMETRIC_MIXTURE",
            Error::InconsistentMoments(_) => "INCONSISTENT_MOMENTS",
            Error::RankDeficient(_) => "RANK_DEFICIENT",
            Error::SingularSystem(_) => "SINGULAR_SYSTEM",
            Error::ModelMismatch(_) => "MODEL_MISMATCH",
        }
    }

    /// `true` for errors caused by malformed input, as opposed to data that
    /// is well-formed but does not fit the model.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::Precondition(_)
                | Error::IndexOutOfRange { .. }
                | Error::InvalidParams(_)
                | Error::EmptyData
                | Error::InsufficientOrder { .. }
                | Error::Envelope(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
