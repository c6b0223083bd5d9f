use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed SVG at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("document has no renderable elements")]
    EmptyDocument,

    #[error("unresolvable reference `{0}`")]
    UnresolvedReference(String),

    #[error("invalid path data in element {element}: {message}")]
    PathData { element: String, message: String },

    #[error("element index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid edit: {0}")]
    InvalidEdit(String),

    #[error("render failed: {0}")]
    Render(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },

    #[error("scoring backend failed: {0}")]
    Backend(String),

    #[error("heatmap error: {0}")]
    Heatmap(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error for {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse failure classes used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Parse,
    Render,
    Backend,
    Io,
    Other,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. } | Error::EmptyDocument | Error::UnresolvedReference(_) | Error::PathData { .. } => {
                ErrorClass::Parse
            }
            Error::Render(_) => ErrorClass::Render,
            Error::Backend(_) => ErrorClass::Backend,
            Error::Io { .. } | Error::Image { .. } | Error::Heatmap(_) | Error::Json(_) => ErrorClass::Io,
            _ => ErrorClass::Other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
