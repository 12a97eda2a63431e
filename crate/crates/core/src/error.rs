use std::path::PathBuf;

use thiserror::Error;

use crate::nn::EpochRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    /// A resource constraint of the allocation problem was violated.
    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parameterization error: {0}")]
    Parameterization(String),

    #[error("non-finite activation in layer {layer}")]
    Numeric { layer: usize },

    #[error("training diverged at iteration {iteration}")]
    Divergence {
        iteration: usize,
        history: Vec<EpochRecord>,
    },

    #[error("model/space mismatch: {0}")]
    ModelSpaceMismatch(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("missing artifact {}: run {stage} first", .path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) | Error::Validation(_) => 2,
            Error::MissingArtifact { .. } => 3,
            Error::Divergence { .. } | Error::Numeric { .. } => 4,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Parse { .. } => 5,
            _ => 1,
        }
    }
}
