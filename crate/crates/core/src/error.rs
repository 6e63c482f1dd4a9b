use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GsemaError>;

/// Broad class of a failure, used by the CLI to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum GsemaError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// `line` and `column` are 1-based; column 0 means the whole line.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate gene id {0:?}")]
    DuplicateGene(String),

    #[error("duplicate sample id {0:?}")]
    DuplicateSample(String),

    #[error("duplicate gene set name {0:?}")]
    DuplicateSet(String),

    #[error("duplicate study id {0:?}")]
    DuplicateStudy(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("no class label for sample {0:?}")]
    MissingLabel(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("no pathways left: {0}")]
    NoPathways(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("zero residual variance without prior information for pathway {0:?}")]
    DegenerateVariance(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("study {study_id}: {source}")]
    Study {
        study_id: String,
        #[source]
        source: Box<GsemaError>,
    },
}

impl GsemaError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        GsemaError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        GsemaError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    /// Wraps the error with the id of the study it came from.
    pub fn in_study(self, study_id: &str) -> Self {
        match self {
            GsemaError::Study { .. } => self,
            other => GsemaError::Study {
                study_id: study_id.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// Strips any study tag.
    pub fn root(&self) -> &GsemaError {
        match self {
            GsemaError::Study { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self.root() {
            GsemaError::Config(_) => ErrorKind::Config,
            GsemaError::DegenerateVariance(_) | GsemaError::Domain(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
