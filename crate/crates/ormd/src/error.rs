use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("cannot serialize scenario: {0}")]
    Serialize(String),
    // The inner errors are part of the message rather than `source()`, so
    // chained reporters do not print them twice.
    #[error("{path}: {inner}")]
    InFile { path: PathBuf, inner: Box<Error> },
    #[error("{path}: {inner}")]
    Io { path: PathBuf, inner: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] ormd_core::Error),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), inner: source }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        Error::InFile { path: path.to_path_buf(), inner: Box::new(self) }
    }

    /// The scenario field this error names, looking through file context.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Field { field, .. } => Some(field),
            Error::InFile { inner, .. } => inner.field(),
            _ => None,
        }
    }
}
