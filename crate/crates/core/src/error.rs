use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("index out of range: {0}")]
    Index(String),

    /// The 4σ gaze cone does not intersect the near plane as a bounded
    /// ellipse. Callers fall back to the unfiltered path.
    #[error("gaze cone is not contained in the forward half-space")]
    GazeOutsideFrustum,

    #[error("invalid frustum: {0}")]
    InvalidFrustum(String),

    #[error("map layout mismatch: map was generated for {expected}, scene hashes to {found}")]
    LayoutMismatch { expected: String, found: String },

    #[error("invalid map file {}: {message}", path.display())]
    InvalidMap { path: PathBuf, message: String },

    #[error("image encoding failed: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_owned(),
            message: message.into(),
        }
    }

    /// Data errors (bad inputs) versus usage errors, for CLI exit codes.
    pub fn is_usage_error(&self) -> bool {
        matches!(self, Error::InvalidConfig { .. })
    }
}
