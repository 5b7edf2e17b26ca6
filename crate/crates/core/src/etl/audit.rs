//! The append-only cleansing audit log.
//!
//! One action per line, tab-separated: lineage, field, kind, original,
//! corrected, similarity. Each pipeline run prepends one `#` header line
//! carrying the threshold it cleansed with. Values are backslash-escaped so
//! the log stays line-oriented whatever the source data contains.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use crate::textenc::{escape, unescape};

use super::extract::Lineage;
use super::{ActionKind, CleansingAction, EtlError};

pub fn append_audit(
    path: &Path,
    threshold: f64,
    actions: &[CleansingAction],
) -> Result<(), EtlError> {
    let mut text = format!("# oncodw-audit v1 threshold={threshold}\n");
    for a in actions {
        text.push_str(&render_action(a));
        text.push('\n');
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| EtlError::Io { path: path.to_path_buf(), source: e })?;
    file.write_all(text.as_bytes())
        .map_err(|e| EtlError::Io { path: path.to_path_buf(), source: e })
}

pub fn render_action(a: &CleansingAction) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        escape(&a.lineage.to_string()),
        escape(&a.field),
        a.kind,
        escape(&a.original),
        escape(&a.corrected),
        a.similarity
    )
}

/// Read an audit log back. Returns the threshold of the last run header and
/// the actions in file order (notes are not persisted).
pub fn parse_audit(path: &Path) -> Result<(Option<f64>, Vec<CleansingAction>), EtlError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EtlError::Io { path: path.to_path_buf(), source: e })?;
    let mut threshold = None;
    let mut actions = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if let Some(value) = header.split("threshold=").nth(1) {
                threshold = value.trim().parse::<f64>().ok();
            }
            continue;
        }
        let bad = |msg: &str| EtlError::AuditFormat {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: msg.to_string(),
        };
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 6 {
            return Err(bad("expected 6 tab-separated fields"));
        }
        let lineage_text = unescape(parts[0]).map_err(|m| bad(&m))?;
        let (file, line_no) = lineage_text
            .rsplit_once(':')
            .ok_or_else(|| bad("lineage must look like file:line"))?;
        let line_no: u64 = line_no.parse().map_err(|_| bad("bad lineage line number"))?;
        let kind = ActionKind::parse_name(parts[2]).ok_or_else(|| bad("unknown action kind"))?;
        actions.push(CleansingAction {
            lineage: Lineage { file: file.to_string(), line: line_no },
            field: unescape(parts[1]).map_err(|m| bad(&m))?,
            original: unescape(parts[3]).map_err(|m| bad(&m))?,
            corrected: unescape(parts[4]).map_err(|m| bad(&m))?,
            similarity: parts[5].parse().map_err(|_| bad("bad similarity"))?,
            kind,
            note: String::new(),
        });
    }
    Ok((threshold, actions))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.log");
        let actions = vec![
            CleansingAction {
                lineage: Lineage { file: "treatments.csv".into(), line: 7 },
                field: "cancerName".into(),
                original: "Leuk\temai".into(),
                corrected: "Leukemia".into(),
                similarity: 0.875,
                kind: ActionKind::Corrected,
                note: "ignored".into(),
            },
            CleansingAction {
                lineage: Lineage { file: "treatments.csv".into(), line: 9 },
                field: String::new(),
                original: String::new(),
                corrected: String::new(),
                similarity: 1.0,
                kind: ActionKind::Deduplicated,
                note: String::new(),
            },
        ];
        append_audit(&path, 0.8, &actions).unwrap();
        let (threshold, parsed) = parse_audit(&path).unwrap();
        assert_eq!(threshold, Some(0.8));
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].original, "Leuk\temai");
        assert_eq!(parsed[0].corrected, "Leukemia");
        assert_eq!(parsed[0].kind, ActionKind::Corrected);
        assert_eq!(parsed[1].lineage.line, 9);

        // appending a second run keeps earlier lines intact
        append_audit(&path, 0.9, &actions[..1]).unwrap();
        let (threshold, parsed) = parse_audit(&path).unwrap();
        assert_eq!(threshold, Some(0.9));
        assert_eq!(parsed.len(), 3);
    }
}
