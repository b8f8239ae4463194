use std::io;

use thiserror::Error;

/// Broad failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Training,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("zero-magnitude CSI entry at antenna {antenna}, subcarrier {subcarrier} of AP {ap_id}")]
    ZeroMagnitude {
        ap_id: u32,
        antenna: usize,
        subcarrier: usize,
    },

    #[error("view label has no informative view")]
    EmptyViewLabel,

    #[error("sample is missing AP {0}")]
    MissingAp(u32),

    #[error("transmitter is colocated with AP {0}")]
    DegenerateGeometry(u32),

    #[error("standard deviation must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("backward pass requested without a recorded forward pass")]
    BackwardWithoutForward,

    #[error("view {0} has no informative training samples")]
    UninformativeView(usize),

    #[error("training diverged: {0}")]
    Training(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::UninformativeView(_) => ErrorKind::Config,
            Error::Data(_)
            | Error::Shape { .. }
            | Error::ZeroMagnitude { .. }
            | Error::EmptyViewLabel
            | Error::MissingAp(_)
            | Error::DegenerateGeometry(_)
            | Error::NonPositiveSigma(_)
            | Error::ModelFormat(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::BackwardWithoutForward | Error::Training(_) => ErrorKind::Training,
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => ErrorKind::Io,
        }
    }

    /// Tags an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected,
            actual,
        })
    }
}
