use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpcdError>;

#[derive(Debug, Error)]
pub enum SpcdError {
    /// A config value failed validation; `key` is the dotted config path.
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("cannot parse config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("cannot serialize config: {0}")]
    ConfigSerialize(#[from] toml::ser::Error),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("input has no `{0}` column (and no y0/y1/a1 columns to derive it from)")]
    MissingColumn(String),

    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    BadValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),

    #[error(transparent)]
    Core(#[from] spcd_core::Error),
}

impl SpcdError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        SpcdError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
