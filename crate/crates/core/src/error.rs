use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid scene: {0}")]
    Validation(String),

    #[error("frame {frame} out of range (scene has {len} camera poses)")]
    FrameOutOfRange { frame: usize, len: usize },

    #[error("invalid resolution {width}x{height}: {reason}")]
    InvalidResolution {
        width: usize,
        height: usize,
        reason: &'static str,
    },

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("macroblock too large: macroblock {index} needs {bytes} bytes, mtu is {mtu}")]
    MacroblockTooLarge { index: usize, bytes: usize, mtu: usize },

    #[error("missing reference frame for P-frame {0}")]
    MissingReference(usize),

    #[error("unknown network profile {0:?}")]
    UnknownProfile(String),

    #[error("trace covers {trace_ms} ms but the session needs {needed_ms} ms")]
    TraceTooShort { trace_ms: f64, needed_ms: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {kind}: {message}")]
    Format { kind: &'static str, message: String },

    #[error("{stage} stage failed")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Tags the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn format(kind: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            kind,
            message: message.into(),
        }
    }
}
