use thiserror::Error;

use crate::model::Gas;

pub type Result<T, E = DispatchError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gas {0} is not part of this problem")]
    UnknownGas(Gas),

    #[error("no penalty factor supplied for gas {0}")]
    MissingPenaltyFactor(Gas),

    #[error("penalty factors were computed for {factors} MW but the problem demand is {problem} MW")]
    DemandMismatch { factors: f64, problem: f64 },

    #[error("infeasible demand {demand} MW: committed capacity spans [{min}, {max}] MW")]
    Infeasible { demand: f64, min: f64, max: f64 },

    #[error("no feasible candidate found: {0}")]
    NoFeasibleCandidate(String),

    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("unit {unit}: emission of {gas} at p_max is {value}, cannot form a cost/emission ratio")]
    DegenerateRatio { unit: usize, gas: Gas, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<DispatchError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DispatchError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        DispatchError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True when the failure means the requested dispatch has no feasible point.
    pub fn is_infeasible(&self) -> bool {
        match self {
            DispatchError::Infeasible { .. } | DispatchError::NoFeasibleCandidate(_) => true,
            DispatchError::Trial { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }
}
