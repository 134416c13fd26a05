//! Stage-by-stage orchestration: rotate, collect, score, aggregate, solve,
//! report and verify. Each stage reads the previous stage's files from the
//! run's output directory, so stages can be rerun independently.

pub mod collect;
pub mod config;
pub mod http;
pub mod report;
pub mod rotate;
pub mod score;
pub mod simulate;
pub mod solve;
pub mod verify;

mod aggregate;

pub use aggregate::{cmd_aggregate, read_aggregation_csv, write_aggregation_csv, AggregateSummary};
pub use collect::{
    cmd_collect, collect, CollectOptions, CollectSummary, FailureRecord, Responder, ResponderError,
};
pub use config::{EndpointDescriptor, ResponseSource, RunConfig};
pub use report::{cmd_report, format_fraction, ReportRow};
pub use rotate::{cmd_rotate, load_realized, realize_all, RotateSummary};
pub use score::{cmd_score, read_outcomes, ScoreSummary};
pub use solve::{cmd_solve, read_solve_csv, solve_rows, SolvedRow};
pub use verify::{cmd_verify, cross_check, VerifyRow};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::aggregation::AggregationError;
use crate::dataset::{DatasetError, Orientation};
use crate::reliability::ReliabilityError;
use crate::rotation::RotationError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Rotation(#[from] RotationError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("endpoint: {0}")]
    Endpoint(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> PipelineError + '_ {
    move |source| PipelineError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// File names inside a run's output directory.
pub mod files {
    use super::*;

    pub const RESPONSES: &str = "responses.jsonl";
    pub const OUTCOMES: &str = "outcomes.jsonl";
    pub const AGGREGATION: &str = "aggregation.csv";
    pub const SOLVE: &str = "solve.csv";
    pub const REPORT_CSV: &str = "report.csv";
    pub const REPORT_TXT: &str = "report.txt";
    pub const VERIFY: &str = "verify.csv";
    pub const REQUEST_LOG: &str = "request_log.jsonl";
    pub const FAILURES: &str = "failures.json";
    pub const RUN: &str = "run.toml";
    pub const IMAGES: &str = "images";

    pub fn realized(phi: Orientation) -> String {
        format!("realized_{:03}.jsonl", phi.degrees())
    }
}
