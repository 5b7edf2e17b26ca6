//! Staged extraction from delimited source exports.
//!
//! Sources are RFC-4180-style delimited text with a required header row.
//! Extraction stages raw text verbatim — no coercion happens here — and
//! records full lineage (file and line) for every staged record. Unreadable
//! lines are reported and skipped; extraction continues.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use super::EtlError;

/// Where a staging record came from: `file:line`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Lineage {
    pub file: String,
    pub line: u64,
}

impl fmt::Display for Lineage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StagingRecord {
    /// Source identifier (the file stem).
    pub source_id: String,
    /// Column name -> raw text, exactly as it appeared.
    pub fields: BTreeMap<String, String>,
    pub lineage: Lineage,
}

/// A line that could not be staged; extraction continued past it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractIssue {
    pub line: u64,
    pub message: String,
}

/// Read every data line of `path` into staging records. The header row must
/// carry exactly `expected_columns` (order-free); otherwise extraction fails
/// listing the missing and extra columns.
pub fn extract(
    path: &Path,
    expected_columns: &[String],
) -> Result<(Vec<StagingRecord>, Vec<ExtractIssue>), EtlError> {
    let file_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| file_name.clone());

    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                EtlError::MissingSource(path.to_path_buf())
            }
            _ => EtlError::Csv { file: file_name.clone(), message: e.to_string() },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| EtlError::Csv { file: file_name.clone(), message: e.to_string() })?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let mut missing: Vec<String> = expected_columns
        .iter()
        .filter(|c| !headers.contains(c))
        .cloned()
        .collect();
    let mut extra: Vec<String> = headers
        .iter()
        .filter(|h| !expected_columns.contains(h))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        missing.sort();
        extra.sort();
        return Err(EtlError::HeaderMismatch { file: file_name, missing, extra });
    }

    let mut records = Vec::new();
    let mut issues = Vec::new();
    for result in reader.records() {
        match result {
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                issues.push(ExtractIssue { line, message: e.to_string() });
            }
            Ok(record) => {
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                if record.len() != headers.len() {
                    issues.push(ExtractIssue {
                        line,
                        message: format!(
                            "expected {} fields, got {}",
                            headers.len(),
                            record.len()
                        ),
                    });
                    continue;
                }
                let fields = headers
                    .iter()
                    .cloned()
                    .zip(record.iter().map(str::to_string))
                    .collect();
                records.push(StagingRecord {
                    source_id: source_id.clone(),
                    fields,
                    lineage: Lineage { file: file_name.clone(), line },
                });
            }
        }
    }

    Ok((records, issues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        path
    }

    fn cols(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn stages_each_data_line_with_lineage() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "t.csv", "a,b\n1,x\n2,y\n3,z\n");
        let (records, issues) = extract(&path, &cols(&["a", "b"])).unwrap();
        assert!(issues.is_empty());
        assert_eq!(records.len(), 3);
        assert_eq!(
            records.iter().map(|r| r.lineage.line).collect::<Vec<_>>(),
            vec![2, 3, 4]
        );
        assert_eq!(records[0].fields["a"], "1");
        assert_eq!(records[0].source_id, "t");
        assert_eq!(records[2].lineage.to_string(), "t.csv:4");
    }

    #[test]
    fn header_mismatch_names_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "t.csv", "a,c\n1,x\n");
        match extract(&path, &cols(&["a", "procCode"])) {
            Err(EtlError::HeaderMismatch { missing, extra, .. }) => {
                assert_eq!(missing, vec!["procCode".to_string()]);
                assert_eq!(extra, vec!["c".to_string()]);
            }
            other => panic!("expected header mismatch, got {other:?}"),
        }
    }

    #[test]
    fn header_only_file_yields_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "t.csv", "a,b\n");
        let (records, issues) = extract(&path, &cols(&["a", "b"])).unwrap();
        assert!(records.is_empty());
        assert!(issues.is_empty());
    }

    #[test]
    fn missing_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("absent.csv");
        assert!(matches!(
            extract(&path, &cols(&["a"])),
            Err(EtlError::MissingSource(_))
        ));
    }

    #[test]
    fn short_line_is_reported_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "t.csv", "a,b\n1,x\n2\n3,z\n");
        let (records, issues) = extract(&path, &cols(&["a", "b"])).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].line, 3);
    }

    #[test]
    fn quoted_fields_keep_raw_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "t.csv", "a,b\n\"1,500.00\",\"two\nlines\"\n");
        let (records, _) = extract(&path, &cols(&["a", "b"])).unwrap();
        assert_eq!(records[0].fields["a"], "1,500.00");
        assert_eq!(records[0].fields["b"], "two\nlines");
    }
}
