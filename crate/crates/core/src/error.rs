use std::path::PathBuf;

use stpotr_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("motion file line {line}{}: {message}", frame.map(|f| format!(" (frame {f})")).unwrap_or_default())]
    MotionFormat {
        line: usize,
        frame: Option<usize>,
        message: String,
    },

    #[error("cannot resample {source_hz} Hz to {target_hz} Hz: upsampling is not supported")]
    UnsupportedUpsampling { source_hz: f64, target_hz: f64 },

    #[error("unknown {what} '{name}'")]
    UnknownKind { what: &'static str, name: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{what}: expected shape {expected:?}, got {got:?}")]
    Shape {
        what: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint does not match the expected configuration; differing fields: {}", fields.join(", "))]
    ConfigMismatch { fields: Vec<String> },

    #[error("need {needed} frames of history, only {available} available")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("predictor failed at step {step}: {source}")]
    Predictor {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("goal undefined: hip segment and predicted displacement are both degenerate and there is no previous goal")]
    DegenerateGoal,

    /// The message already carries the cause, so it is not chained.
    #[error("{}: {cause}", path.display())]
    Io { path: PathBuf, cause: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause: source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
