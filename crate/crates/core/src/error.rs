use thiserror::Error;

/// Errors raised while loading models or planning.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid model: {0}")]
    Semantic(String),

    #[error("joint observation {observation} has zero probability under joint action {action}")]
    ZeroProbabilityObservation { action: usize, observation: usize },

    #[error("exhaustive backup would build {requested} trees for agent {agent} (limit {limit})")]
    CapacityExceeded {
        agent: usize,
        requested: u128,
        limit: u128,
    },

    #[error("exhaustive backup would evaluate {requested} joint trees (limit {limit})")]
    JointCapacityExceeded { requested: u128, limit: u128 },

    #[error("linear program failed: {0}")]
    LpNumericalFailure(String),

    #[error("every joint policy tree in the search space has already been selected")]
    SearchSpaceExhausted,

    #[error("branch-and-bound exceeded the node limit of {0}")]
    NodeLimitExceeded(u64),

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("policy does not match the model: {0}")]
    PolicyModelMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by a resource limit rather than bad input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            Error::CapacityExceeded { .. }
                | Error::JointCapacityExceeded { .. }
                | Error::NodeLimitExceeded(_)
        )
    }

    /// True for errors caused by the model or policy input.
    pub fn is_model_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::Semantic(_)
                | Error::UnknownBenchmark(_)
                | Error::PolicyModelMismatch(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
