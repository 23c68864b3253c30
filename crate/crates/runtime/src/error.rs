use std::fmt;

use thiserror::Error;

use crate::ast::Pos;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at line {line}, column {col}: expected {expected}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub expected: String,
}

impl SyntaxError {
    pub(crate) fn new(pos: Pos, expected: impl Into<String>) -> Self {
        Self {
            line: pos.line,
            col: pos.col,
            expected: expected.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    Type,
    Name,
    Capability,
    Budget,
    Builtin,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Type => "type",
            ErrorKind::Name => "name",
            ErrorKind::Capability => "capability",
            ErrorKind::Budget => "budget",
            ErrorKind::Builtin => "builtin",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An error raised before a source line is known, e.g. inside a builtin.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} error: {message}")]
pub struct Fault {
    pub kind: ErrorKind,
    pub message: String,
}

impl Fault {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn type_error(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Type, message)
    }

    pub fn builtin(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Builtin, message)
    }

    pub fn at(self, line: usize) -> RuntimeError {
        RuntimeError {
            kind: self.kind,
            message: self.message,
            line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} error at line {line}: {message}")]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub message: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("script id {0:?} is already registered")]
    Duplicate(String),
    #[error("script id must not be empty")]
    EmptyId,
}
