//! The load pipeline: extract, cleanse, transform, apply, audit.
//!
//! Sources are applied serially in the order their mappings are declared
//! (reference dimensions before facts), each file in full before the next.
//! File-level failures (missing file, header mismatch, no mapping) abort that
//! file only; row-level problems become rejection actions. Identical inputs
//! and options produce identical warehouse state, stats and audit lines —
//! only `elapsed` varies.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::store::Warehouse;

use super::audit::append_audit;
use super::cleanse::cleanse;
use super::extract::{extract, ExtractIssue};
use super::mapping::{Mapping, SourceMapping};
use super::transform::{transform, ConformedRow};
use super::{ActionKind, CleansingAction, EtlError};

/// Default fuzzy-lookup threshold: admits one edit on words of five or more
/// characters, two on ten or more.
pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub threshold: f64,
    /// Audit log to append to; omit to skip audit output.
    pub audit_path: Option<PathBuf>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { threshold: DEFAULT_THRESHOLD, audit_path: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub extracted: u64,
    /// Records that survived cleansing (corrections applied).
    pub cleansed: u64,
    /// Corrected field actions.
    pub corrected: u64,
    pub deduplicated: u64,
    pub rejected: u64,
    pub loaded: u64,
    pub elapsed: Duration,
}

impl LoadStats {
    /// The conservation identity every run must satisfy.
    pub fn conserves(&self) -> bool {
        self.loaded == self.extracted - self.deduplicated - self.rejected
    }

    pub fn absorb(&mut self, other: &LoadStats) {
        self.extracted += other.extracted;
        self.cleansed += other.cleansed;
        self.corrected += other.corrected;
        self.deduplicated += other.deduplicated;
        self.rejected += other.rejected;
        self.loaded += other.loaded;
        self.elapsed += other.elapsed;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourceStatus {
    Loaded,
    Aborted(String),
}

#[derive(Clone, Debug)]
pub struct SourceOutcome {
    pub file: PathBuf,
    pub stem: String,
    pub status: SourceStatus,
    pub stats: LoadStats,
    pub extract_issues: Vec<ExtractIssue>,
    pub facts_before: u64,
    pub facts_after: u64,
}

#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub threshold: f64,
    pub totals: LoadStats,
    pub sources: Vec<SourceOutcome>,
}

impl PipelineReport {
    pub fn any_aborted(&self) -> bool {
        self.sources
            .iter()
            .any(|s| matches!(s.status, SourceStatus::Aborted(_)))
    }
}

/// Run the full acquisition pipeline over `sources` into `wh`.
pub fn run_pipeline(
    sources: &[PathBuf],
    mapping: &Mapping,
    wh: &mut Warehouse,
    options: &PipelineOptions,
) -> Result<PipelineReport, EtlError> {
    mapping.validate(wh.schema())?;
    assert!(
        options.threshold > 0.0 && options.threshold <= 1.0,
        "threshold must lie in (0, 1]"
    );

    // declared mapping order first, argument order within a stem
    let mut ordered: Vec<(&PathBuf, Option<&SourceMapping>)> = Vec::new();
    for sm in &mapping.sources {
        for path in sources {
            if stem_of(path) == sm.stem {
                ordered.push((path, Some(sm)));
            }
        }
    }
    for path in sources {
        if mapping.source_for_stem(&stem_of(path)).is_none() {
            ordered.push((path, None));
        }
    }

    let mut outcomes = Vec::new();
    let mut all_actions = Vec::new();
    for (path, sm) in ordered {
        let facts_before = wh.fact_count() as u64;
        let outcome = match sm {
            None => SourceOutcome {
                file: path.clone(),
                stem: stem_of(path),
                status: SourceStatus::Aborted(format!(
                    "no mapping entry for source stem {:?}",
                    stem_of(path)
                )),
                stats: LoadStats::default(),
                extract_issues: Vec::new(),
                facts_before,
                facts_after: facts_before,
            },
            Some(sm) => load_source(path, sm, wh, options.threshold, &mut all_actions),
        };
        outcomes.push(outcome);
    }

    if let Some(audit_path) = &options.audit_path {
        append_audit(audit_path, options.threshold, &all_actions)?;
    }

    let mut totals = LoadStats::default();
    for o in &outcomes {
        totals.absorb(&o.stats);
    }
    debug_assert!(totals.conserves());
    Ok(PipelineReport { threshold: options.threshold, totals, sources: outcomes })
}

fn load_source(
    path: &Path,
    sm: &SourceMapping,
    wh: &mut Warehouse,
    threshold: f64,
    all_actions: &mut Vec<CleansingAction>,
) -> SourceOutcome {
    let start = Instant::now();
    let facts_before = wh.fact_count() as u64;
    let stem = stem_of(path);
    let abort = |msg: String, facts_before: u64| SourceOutcome {
        file: path.to_path_buf(),
        stem: stem.clone(),
        status: SourceStatus::Aborted(msg),
        stats: LoadStats::default(),
        extract_issues: Vec::new(),
        facts_before,
        facts_after: facts_before,
    };

    let (records, extract_issues) = match extract(path, &sm.expected_columns()) {
        Ok(r) => r,
        Err(e) => return abort(e.to_string(), facts_before),
    };
    let extracted = records.len() as u64;

    let (kept, mut actions) = cleanse(records, wh, sm, threshold);
    let cleansed = kept.len() as u64;

    let (rows, rejections) = transform(&kept, sm, wh);
    actions.extend(rejections);

    let mut loaded = 0u64;
    for row in rows {
        let applied = match &row {
            ConformedRow::Dimension { dim, natural_key, attributes, effective, .. } => wh
                .upsert_dimension_row(dim, natural_key, attributes.clone(), *effective)
                .map(|_| ()),
            ConformedRow::Fact { dim_naturals, measures, as_of, .. } => {
                wh.append_fact(dim_naturals, measures, *as_of).map(|_| ())
            }
        };
        match applied {
            Ok(()) => loaded += 1,
            Err(e) => actions.push(CleansingAction {
                lineage: row.lineage().clone(),
                field: String::new(),
                original: String::new(),
                corrected: String::new(),
                similarity: 0.0,
                kind: ActionKind::Rejected,
                note: e.to_string(),
            }),
        }
    }

    let stats = LoadStats {
        extracted,
        cleansed,
        corrected: count(&actions, ActionKind::Corrected),
        deduplicated: count(&actions, ActionKind::Deduplicated),
        rejected: count(&actions, ActionKind::Rejected),
        loaded,
        elapsed: start.elapsed(),
    };
    debug_assert!(stats.conserves(), "conservation violated for {path:?}: {stats:?}");
    all_actions.extend(actions);
    SourceOutcome {
        file: path.to_path_buf(),
        stem,
        status: SourceStatus::Loaded,
        stats,
        extract_issues,
        facts_before,
        facts_after: wh.fact_count() as u64,
    }
}

fn count(actions: &[CleansingAction], kind: ActionKind) -> u64 {
    actions.iter().filter(|a| a.kind == kind).count() as u64
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Per-source stats file writer/reader so a later `evaluate` can reconstruct
/// a pipeline report without re-running the load. Tab-separated, one line per
/// source, with a `total` line last.
pub fn write_stats_file(path: &Path, report: &PipelineReport) -> Result<(), EtlError> {
    use std::fmt::Write as _;
    let mut out = format!("# oncodw-stats v1 threshold={}\n", report.threshold);
    for s in &report.sources {
        let status = match &s.status {
            SourceStatus::Loaded => "loaded".to_string(),
            SourceStatus::Aborted(msg) => format!("aborted:{}", msg.replace(['\t', '\n'], " ")),
        };
        let _ = writeln!(
            out,
            "source\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.stem,
            s.file.display(),
            s.stats.extracted,
            s.stats.cleansed,
            s.stats.corrected,
            s.stats.deduplicated,
            s.stats.rejected,
            s.stats.loaded,
            s.facts_before,
            s.facts_after,
            status,
        );
    }
    let t = &report.totals;
    let _ = writeln!(
        out,
        "total\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        t.extracted, t.cleansed, t.corrected, t.deduplicated, t.rejected, t.loaded,
        t.elapsed.as_millis()
    );
    std::fs::write(path, out).map_err(|e| EtlError::Io { path: path.to_path_buf(), source: e })
}

pub fn read_stats_file(path: &Path) -> Result<PipelineReport, EtlError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EtlError::Io { path: path.to_path_buf(), source: e })?;
    let mut threshold = DEFAULT_THRESHOLD;
    let mut sources = Vec::new();
    let mut totals = LoadStats::default();
    let bad = |line: usize, msg: &str| EtlError::AuditFormat {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if let Some(value) = header.split("threshold=").nth(1) {
                threshold = value.trim().parse().map_err(|_| bad(idx + 1, "bad threshold"))?;
            }
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        match parts.as_slice() {
            ["source", stem, file, ex, cl, co, de, re, lo, fb, fa, status] => {
                let n = |s: &str| s.parse::<u64>().map_err(|_| bad(idx + 1, "bad count"));
                sources.push(SourceOutcome {
                    file: PathBuf::from(file),
                    stem: stem.to_string(),
                    status: if *status == "loaded" {
                        SourceStatus::Loaded
                    } else {
                        SourceStatus::Aborted(
                            status.strip_prefix("aborted:").unwrap_or(status).to_string(),
                        )
                    },
                    stats: LoadStats {
                        extracted: n(ex)?,
                        cleansed: n(cl)?,
                        corrected: n(co)?,
                        deduplicated: n(de)?,
                        rejected: n(re)?,
                        loaded: n(lo)?,
                        elapsed: Duration::ZERO,
                    },
                    extract_issues: Vec::new(),
                    facts_before: n(fb)?,
                    facts_after: n(fa)?,
                });
            }
            ["total", ex, cl, co, de, re, lo, ms] => {
                let n = |s: &str| s.parse::<u64>().map_err(|_| bad(idx + 1, "bad count"));
                totals = LoadStats {
                    extracted: n(ex)?,
                    cleansed: n(cl)?,
                    corrected: n(co)?,
                    deduplicated: n(de)?,
                    rejected: n(re)?,
                    loaded: n(lo)?,
                    elapsed: Duration::from_millis(n(ms)?),
                };
            }
            _ => return Err(bad(idx + 1, "unrecognized stats line")),
        }
    }
    Ok(PipelineReport { threshold, totals, sources })
}
