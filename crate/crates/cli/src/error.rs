use std::path::Path;

use thiserror::Error;

/// A CLI failure, tagged with the config key (or flag) that caused it.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("numeric error at `{key}`: {source}")]
    Numeric {
        key: String,
        #[source]
        source: cvmem::Error,
    },
    #[error("I/O error at `{key}` ({path}): {message}")]
    Io { key: String, path: String, message: String },
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl ToString) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.to_string(),
        }
    }

    pub fn io(key: impl Into<String>, path: &Path, message: impl ToString) -> Self {
        CliError::Io {
            key: key.into(),
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numeric { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a key to library errors. Parameter errors become config errors,
/// I/O and parse failures stay I/O, the rest are numeric.
pub trait Context<T> {
    fn at(self, key: &str) -> CliResult<T>;
}

impl<T> Context<T> for cvmem::Result<T> {
    fn at(self, key: &str) -> CliResult<T> {
        self.map_err(|e| match e {
            cvmem::Error::InvalidParameter { .. } | cvmem::Error::InvalidDimension(_) => CliError::config(key, e),
            cvmem::Error::Io(_) | cvmem::Error::Parse(_) => CliError::Io {
                key: key.to_string(),
                path: String::new(),
                message: e.to_string(),
            },
            other => CliError::Numeric {
                key: key.to_string(),
                source: other,
            },
        })
    }
}
