use std::fmt::Display;

use chronicle_core::duration::DurationError;
use chronicle_core::{
    CorpusError, EvolutionError, ExtractError, OntologyError, RelationError, SummaryError, TemporalError,
};
use serde::Serialize;
use thiserror::Error;

/// A failed stage, reported on stderr as one JSON object.
#[derive(Debug, Error, Serialize)]
#[error("{stage}: {kind}: {message}")]
pub struct Failure {
    pub stage: &'static str,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn new(stage: &'static str, kind: impl Into<String>, message: impl Display) -> Self {
        Failure {
            stage,
            kind: kind.into(),
            message: message.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("failure serializes")
    }
}

/// Errors that carry a stable machine-readable kind.
pub trait ErrorKind: Display {
    fn error_kind(&self) -> &'static str;
}

macro_rules! error_kind {
    ($($ty:ty),*) => {
        $(impl ErrorKind for $ty {
            fn error_kind(&self) -> &'static str {
                self.kind()
            }
        })*
    };
}

error_kind!(
    CorpusError,
    ExtractError,
    OntologyError,
    RelationError,
    SummaryError,
    TemporalError,
    EvolutionError
);

impl ErrorKind for DurationError {
    fn error_kind(&self) -> &'static str {
        "InvalidDuration"
    }
}

impl ErrorKind for std::io::Error {
    fn error_kind(&self) -> &'static str {
        "Io"
    }
}

pub trait Staged<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T, E: ErrorKind> Staged<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(stage, e.error_kind(), &e))
    }
}
