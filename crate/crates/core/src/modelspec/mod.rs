//! The model language: parsing, printing, lowering to relcore types, and the
//! trained-parameter file format.

mod ast;
mod lexer;
mod lower;
mod parser;
mod print;
mod trained;

use std::fmt;

pub use ast::*;
pub use lexer::{tokenize, Tok, Token};
pub use lower::{lower, Model};
pub use parser::parse;
pub use print::print;
pub use trained::{load_trained, serialize_trained, trained_mix_lambda};

use crate::relcore::ValidationReport;

/// Location of a token: 1-based line and column, length in characters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    /// Tokens that would have been accepted at the error location.
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(span: Span, message: String, expected: Vec<String>) -> Self {
        Self {
            line: span.line,
            col: span.col,
            message,
            expected,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)?;
        if self.expected.len() > 1 {
            write!(f, " (expected one of {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{line}:{col}: {message}")]
    Lower {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("invalid model:\n{0}")]
    Invalid(ValidationReport),
    #[error("no target layer")]
    NoTarget,
    #[error("parameter file line {line}: {message}")]
    Trained { line: usize, message: String },
    #[error("parameters do not match the model: {0}")]
    Mismatch(String),
}

impl ModelError {
    pub(crate) fn at(span: Span, message: impl Into<String>) -> Self {
        ModelError::Lower {
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }
}

/// Parses and lowers a model document in one step.
pub fn load_model(text: &str) -> Result<Model, ModelError> {
    lower(&parse(text)?)
}
