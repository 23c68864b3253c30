use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("lab replied {code}: {message}")]
    Remote { code: String, message: String },
}

impl LabError {
    /// Wire error code for this failure.
    pub fn code(&self) -> &str {
        match self {
            LabError::BadRequest(_) => "bad_request",
            LabError::Transport(_) => "transport",
            LabError::Remote { code, .. } => code,
        }
    }
}
