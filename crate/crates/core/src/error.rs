use thiserror::Error;

use crate::feature_store::FeatureError;

/// A configuration field outside its permitted range.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError { field, message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum LocalizeError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
}
