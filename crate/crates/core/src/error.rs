use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error("{path}:{line}: {message}")]
    Annotation {
        path: String,
        line: usize,
        message: String,
    },

    #[error("overlapping reference segments in {uri}: [{a_start}, {a_end}] and [{b_start}, {b_end}]")]
    OverlappingSegments {
        uri: String,
        a_start: f64,
        a_end: f64,
        b_start: f64,
        b_end: f64,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("speaker {speaker} has no annotated segment of at least {duration}s")]
    NoSegmentLongEnough { speaker: String, duration: f64 },

    #[error("signal too short: {0}")]
    TooShort(String),

    #[error("degenerate embedding: pre-normalization norm {0:e}")]
    DegenerateEmbedding(f64),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("covariance not positive definite")]
    NotPositiveDefinite,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::UnsupportedAudio(_) => "unsupported_audio",
            Error::Annotation { .. } => "annotation",
            Error::OverlappingSegments { .. } => "overlap",
            Error::Config(_) => "config",
            Error::Dimension(_) => "dimension",
            Error::NoSegmentLongEnough { .. } => "no_segment",
            Error::TooShort(_) => "too_short",
            Error::DegenerateEmbedding(_) => "degenerate_embedding",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::Empty(_) => "empty",
            Error::ModelFormat(_) => "model_format",
            Error::Json(_) => "json",
        }
    }
}
