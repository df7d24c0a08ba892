use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Weighted normal equations could not be solved during IRLS.
    #[error("singular weighted normal equations at IRLS iteration {iteration}")]
    SingularFit { iteration: usize },

    #[error("unit {unit_id}: design has no contrast in the state variable, slope is unidentified")]
    Unidentified { unit_id: u64 },

    #[error("degenerate spread: all draws identical")]
    DegenerateSpread,

    /// One or more units failed inside a batch; the others completed.
    #[error("{} unit(s) failed, first: unit {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Batch(Vec<(u64, Box<Error>)>),

    /// Element-level failure inside an order-preserving batch.
    #[error("element {index}: {source}")]
    Element {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("missing input artifact: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("malformed artifact {}: {msg}", .path.display())]
    Artifact { path: PathBuf, msg: String },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Innermost error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
