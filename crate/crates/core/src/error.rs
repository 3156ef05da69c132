use thiserror::Error;

/// Errors raised by the estimation and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("cell {cell} has population mass {size} but no sampled units")]
    EmptyCell { cell: usize, size: f64 },

    #[error("domain {domain} has no sampled units")]
    EmptyDomain { domain: u8 },

    #[error("singular design: numerical rank {rank} < {cols} columns")]
    SingularDesign { rank: usize, cols: usize },

    #[error("invalid weight model: {0}")]
    InvalidWeightModel(String),

    #[error("degenerate design: z support point {z_index} has zero inclusion mass")]
    DegenerateDesign { z_index: usize },

    #[error("unrecoverable support: z support point {z_index} has zero sample mass")]
    UnrecoverableSupport { z_index: usize },

    #[error("empty complement: every unit at z support point {z_index} is included with certainty")]
    EmptyComplement { z_index: usize },

    #[error("z level {level:?} needed for prediction is absent from the sample")]
    UnsupportedLevel { level: Vec<f64> },

    #[error("sum of (w - 1) is zero at z level {level:?}")]
    DegenerateWeights { level: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short stable code used in CSV outputs.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidState(_) => "invalid_state",
            Error::EmptyCell { .. } => "empty_cell",
            Error::EmptyDomain { .. } => "empty_domain",
            Error::SingularDesign { .. } => "singular_design",
            Error::InvalidWeightModel(_) => "invalid_weight_model",
            Error::DegenerateDesign { .. } => "degenerate_design",
            Error::UnrecoverableSupport { .. } => "unrecoverable_support",
            Error::EmptyComplement { .. } => "empty_complement",
            Error::UnsupportedLevel { .. } => "unsupported_level",
            Error::DegenerateWeights { .. } => "degenerate_weights",
        }
    }
}
