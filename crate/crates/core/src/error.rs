use thiserror::Error;

/// Errors raised by the library.
///
/// `Input` covers precondition violations by the caller (bad shapes, out of
/// range parameters). `Runtime` covers failures that only show up while a
/// run is in progress, such as an exhausted stream or a diverging model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CfalError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CfalError>;

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(CfalError::Input(msg.into()))
}

impl From<std::io::Error> for CfalError {
    fn from(e: std::io::Error) -> Self {
        CfalError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CfalError {
    fn from(e: serde_json::Error) -> Self {
        CfalError::Config(e.to_string())
    }
}
