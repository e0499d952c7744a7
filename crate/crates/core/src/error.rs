use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not a rotation (orthonormality error {error:.3e})")]
    NotARotation { error: f64 },

    #[error("point lies behind the camera (camera-space z = {z:.3e})")]
    BehindCamera { z: f64 },

    #[error("depth must be positive, got {depth}")]
    NonPositiveDepth { depth: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("missing file: {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("corrupt header in {}: {reason}", path.display())]
    CorruptHeader { path: PathBuf, reason: String },

    #[error("inconsistent dimensions in {}: {reason}", path.display())]
    InconsistentDimensions { path: PathBuf, reason: String },

    #[error("parse error in {}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },

    #[error("fewer than {required} static tracklets visible in frames {start}..={end} (found {found})")]
    InsufficientStaticTracks {
        start: usize,
        end: usize,
        found: usize,
        required: usize,
    },

    #[error("non-finite loss at iteration {iteration} (block `{block}`)")]
    NonFiniteLoss { iteration: usize, block: String },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("insufficient overlap: {found} valid pixel pairs, need at least {required}")]
    InsufficientOverlap { found: usize, required: usize },

    #[error("scene has no geometry")]
    EmptyScene,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
