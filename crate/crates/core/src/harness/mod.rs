//! Command implementations behind the `mrg-bench` binary.

mod build;
mod evaluate;
pub mod predictions;
pub mod report;
mod validate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{SceneGraphError, SplitError, TemplateError};
use crate::dialogue::CorpusError;
use crate::metric::EvalError;
use crate::similarity::SimilarityError;

pub use build::{cmd_build, parse_holdout, BuildOptions, BuildSummary};
pub use evaluate::{cmd_evaluate, cmd_report, score_records, EvaluateOptions, PROMPT_VARIANTS};
pub use validate::{cmd_validate, StructuralIssue, ValidationReport};

/// Process exit status.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_STRUCTURAL: i32 = 2;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error("{path}: {source}")]
    SceneGraph {
        path: PathBuf,
        #[source]
        source: SceneGraphError,
    },
    #[error("{path}: line {line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("no prediction for thread '{0}'")]
    MissingPrediction(String),
    #[error("{0}")]
    Invalid(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn corpus(path: &Path, source: CorpusError) -> Self {
        HarnessError::Corpus {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Every harness error is an I/O or structural failure.
    pub fn exit_code(&self) -> i32 {
        EXIT_STRUCTURAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Markdown => "markdown",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format '{other}'")),
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}
