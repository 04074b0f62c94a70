// SPDX-License-Identifier: Apache-2.0

//! Crate-wide error type.

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed binary or text input (wrong record size, bad float, ...).
    #[error("format error: {0}")]
    Format(String),

    /// Configuration key failed to parse or violated an invariant.
    #[error("config error for key `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// Pose or calibration line failed to parse.
    #[error("pose error at line {line}: {msg}")]
    Pose { line: usize, msg: String },

    /// Inconsistent data shapes (length mismatches, missing frames, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
