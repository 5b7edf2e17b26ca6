//! Data acquisition: extract, cleanse, transform, load.
//!
//! Staged records keep their raw text and lineage until the transform;
//! cleansing corrects spelling mistakes against the warehouse vocabulary and
//! deletes duplicated records, logging every disposition to the audit trail.
//! See [`run_pipeline`] for the end-to-end flow.

mod audit;
mod cleanse;
mod extract;
mod mapping;
mod matching;
mod pipeline;
mod transform;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::store::StoreError;

pub use audit::{append_audit, parse_audit, render_action};
pub use cleanse::{cleanse, reference_vocabulary};
pub use extract::{extract, ExtractIssue, Lineage, StagingRecord};
pub use mapping::{
    ColumnRule, ColumnTarget, DateFormat, EffectiveRule, Mapping, MappingError, SourceMapping,
    SourceTarget,
};
pub use matching::{damerau_levenshtein, fold, fuzzy_lookup, similarity, LookupOutcome};
pub use pipeline::{
    read_stats_file, run_pipeline, write_stats_file, LoadStats, PipelineOptions, PipelineReport,
    SourceOutcome, SourceStatus, DEFAULT_THRESHOLD,
};
pub use transform::{parse_date, parse_decimal, transform, ConformedRow};

#[derive(Debug, Error)]
pub enum EtlError {
    #[error("source file {0:?} does not exist")]
    MissingSource(PathBuf),
    #[error("header of {file:?} does not match the mapping (missing {missing:?}, extra {extra:?})")]
    HeaderMismatch { file: String, missing: Vec<String>, extra: Vec<String> },
    #[error("cannot read {file:?}: {message}")]
    Csv { file: String, message: String },
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("i/o error on {path:?}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad audit/stats line {line} in {path:?}: {msg}")]
    AuditFormat { path: PathBuf, line: usize, msg: String },
}

/// How a record (or one of its fields) fared during cleansing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionKind {
    Corrected,
    Deduplicated,
    Rejected,
    Passed,
}

impl ActionKind {
    pub fn parse_name(s: &str) -> Option<ActionKind> {
        match s {
            "corrected" => Some(ActionKind::Corrected),
            "deduplicated" => Some(ActionKind::Deduplicated),
            "rejected" => Some(ActionKind::Rejected),
            "passed" => Some(ActionKind::Passed),
            _ => None,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionKind::Corrected => "corrected",
            ActionKind::Deduplicated => "deduplicated",
            ActionKind::Rejected => "rejected",
            ActionKind::Passed => "passed",
        })
    }
}

/// One entry of the cleansing audit trail.
#[derive(Clone, Debug, PartialEq)]
pub struct CleansingAction {
    pub lineage: Lineage,
    /// The field acted on; empty for whole-record dispositions.
    pub field: String,
    pub original: String,
    pub corrected: String,
    pub similarity: f64,
    pub kind: ActionKind,
    /// Human-readable reason; carried in memory, not persisted to the log.
    pub note: String,
}
