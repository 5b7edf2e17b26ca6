//! Deterministic synthetic source bundles.
//!
//! A bundle holds delimited exports (reference dimensions, patient versions
//! with effective dates, treatment events), the schema and mapping that
//! describe them, and a truth sidecar recording every seeded corruption.
//! The same seed produces byte-identical output.
//!
//! Corruptions are single-edit/transposition typos on the name fields of
//! treatment rows plus exact row duplicates. Every seeded typo is guaranteed
//! recoverable: the corrupted value's unique best vocabulary match at the
//! default threshold is its original, so cleansing quality is measured
//! against a truth file with no ambiguity baked in.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::date::Date;
use crate::etl::{fold, similarity, Lineage, DEFAULT_THRESHOLD};
use crate::textenc::{escape, unescape};

use super::EvalError;

pub const CANCERS: &[(&str, &str, &str)] = &[
    ("C41", "Sarcoma", "Bone"),
    ("C43", "Melanoma", "Skin"),
    ("C50", "Carcinoma", "Breast"),
    ("C71", "Glioblastoma", "Brain"),
    ("C81", "Lymphoma", "Blood"),
    ("C91", "Leukemia", "Blood"),
];

pub const CANCER_SYNONYMS: &[(&str, &str)] = &[
    ("Leukaemia", "C91"),
    ("Hodgkin", "C81"),
    ("Skin melanoma", "C43"),
];

pub const PROCEDURES: &[(&str, &str, &str)] = &[
    ("PR01", "Chemotherapy", "Drug"),
    ("PR02", "Radiotherapy", "Radiation"),
    ("PR03", "Surgery", "Operative"),
    ("PR04", "Immunotherapy", "Drug"),
    ("PR05", "Hormone therapy", "Drug"),
];

pub const PROC_SYNONYMS: &[(&str, &str)] = &[("Chemo", "PR01"), ("Radiation therapy", "PR02")];

const FIRST_NAMES: &[&str] = &[
    "Amina", "Bassem", "Clara", "Dalia", "Elias", "Farida", "Gamal", "Hana", "Ibrahim", "Jana",
    "Karim", "Laila", "Mona", "Nader", "Omar", "Rania", "Samir", "Tamara", "Walid", "Yasmin",
];
const LAST_NAMES: &[&str] = &[
    "Aziz", "Badawi", "Darwish", "ElSayed", "Farouk", "Ghanem", "Hassan", "Ismail", "Khalil",
    "Mansour", "Nassar", "Osman", "Qureshi", "Rashad", "Saleh", "Tawfik", "Younis", "Zaki",
];
const STAGES: &[&str] = &["I", "II", "III", "IV"];
const PHASES: &[&str] = &["Diagnosis", "Treatment", "Remission", "Relapse"];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDatasetSpec {
    pub patients: usize,
    pub facts: usize,
    /// Fraction of treatment rows receiving one corrupted name field.
    pub typo_rate: f64,
    /// Fraction of treatment rows duplicated verbatim.
    pub dup_rate: f64,
    pub seed: u64,
    pub span: (Date, Date),
}

impl Default for SyntheticDatasetSpec {
    fn default() -> Self {
        SyntheticDatasetSpec {
            patients: 200,
            facts: 5_000,
            typo_rate: 0.05,
            dup_rate: 0.02,
            seed: 42,
            span: (
                Date::new(2009, 1, 1).expect("valid"),
                Date::new(2012, 12, 31).expect("valid"),
            ),
        }
    }
}

/// One seeded corruption, as recorded in the truth sidecar.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthRecord {
    pub lineage: Lineage,
    /// Corrupted field name, or [`TRUTH_DUP_FIELD`] for a seeded duplicate.
    pub field: String,
    pub original: String,
    pub corrupted: String,
}

/// Marker used in the truth file's field column for seeded duplicates; the
/// `original` column then carries the line number of the copied row.
pub const TRUTH_DUP_FIELD: &str = "__dup__";

#[derive(Clone, Debug)]
pub struct GeneratedDataset {
    pub dir: PathBuf,
    /// Source files in load order.
    pub source_files: Vec<PathBuf>,
    pub schema_file: PathBuf,
    pub mapping_file: PathBuf,
    pub truth_file: PathBuf,
    pub seeded_typos: usize,
    pub seeded_duplicates: usize,
}

pub fn generate_dataset(
    spec: &SyntheticDatasetSpec,
    dir: &Path,
) -> Result<GeneratedDataset, EvalError> {
    if !(0.0..=1.0).contains(&spec.typo_rate) || !(0.0..=1.0).contains(&spec.dup_rate) {
        return Err(EvalError::InvalidSpec("rates must lie in [0, 1]".to_string()));
    }
    if spec.patients == 0 || spec.facts == 0 {
        return Err(EvalError::InvalidSpec("counts must be positive".to_string()));
    }
    if spec.span.0 > spec.span.1 {
        return Err(EvalError::InvalidSpec("date span start exceeds end".to_string()));
    }
    std::fs::create_dir_all(dir).map_err(|e| EvalError::Io { path: dir.to_path_buf(), source: e })?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let schema_file = dir.join("schema.star");
    write(&schema_file, crate::reference_schema_text().as_bytes())?;
    let mapping_file = dir.join("mapping.map");
    write(&mapping_file, crate::reference_mapping_text().as_bytes())?;

    let dates = dir.join("dates.csv");
    write_csv(&dates, &["dateKey", "day", "month", "quarter", "year"], {
        let mut rows = Vec::new();
        let mut day = spec.span.0;
        loop {
            rows.push(vec![
                day.yyyymmdd().to_string(),
                day.day().to_string(),
                day.month().to_string(),
                day.quarter().to_string(),
                day.year().to_string(),
            ]);
            if day == spec.span.1 {
                break;
            }
            day = day.plus_days(1).expect("span fits the calendar");
        }
        rows
    })?;

    let cancer_types = dir.join("cancer_types.csv");
    write_csv(
        &cancer_types,
        &["cancerCode", "cancerName", "organ"],
        CANCERS.iter().map(|(c, n, o)| vec![c.to_string(), n.to_string(), o.to_string()]).collect(),
    )?;

    let procedures = dir.join("procedures.csv");
    write_csv(
        &procedures,
        &["procCode", "procName", "kind"],
        PROCEDURES.iter().map(|(c, n, k)| vec![c.to_string(), n.to_string(), k.to_string()]).collect(),
    )?;

    // patient versions: a base row per patient, later stage/phase updates for
    // some, ordered per patient by effective date
    let span_days = spec.span.1.day_number() - spec.span.0.day_number();
    let mut patient_rows: Vec<Vec<String>> = Vec::new();
    let mut first_effective: Vec<Date> = Vec::with_capacity(spec.patients);
    for i in 1..=spec.patients {
        let no = format!("P{i:05}");
        let name = format!(
            "{} {}",
            FIRST_NAMES.choose(&mut rng).expect("non-empty"),
            LAST_NAMES.choose(&mut rng).expect("non-empty")
        );
        let sex = if rng.gen_bool(0.5) { "F" } else { "M" };
        let birth = random_date(&mut rng, Date::new(1930, 1, 1).expect("valid"), Date::new(1995, 12, 31).expect("valid"));
        let effective0 = spec
            .span
            .0
            .plus_days(rng.gen_range(0..=span_days / 4))
            .expect("within span");
        first_effective.push(effective0);

        let mut stage_idx = rng.gen_range(0..2usize);
        let mut phase_idx = rng.gen_range(0..2usize);
        let mut versions = vec![(effective0, stage_idx, phase_idx)];
        let updates = if rng.gen_bool(0.3) { 1 + usize::from(rng.gen_bool(0.3)) } else { 0 };
        let mut last = effective0;
        for _ in 0..updates {
            let remaining = spec.span.1.day_number() - last.day_number();
            if remaining < 2 {
                break;
            }
            last = last.plus_days(rng.gen_range(1..=remaining)).expect("within span");
            stage_idx = (stage_idx + 1).min(STAGES.len() - 1);
            phase_idx = (phase_idx + 1) % PHASES.len();
            versions.push((last, stage_idx, phase_idx));
        }
        for (effective, s, p) in versions {
            patient_rows.push(vec![
                no.clone(),
                name.clone(),
                sex.to_string(),
                format_dmy(birth),
                STAGES[s].to_string(),
                PHASES[p].to_string(),
                effective.to_string(),
            ]);
        }
    }
    let patients = dir.join("patients.csv");
    write_csv(
        &patients,
        &["patientNo", "name", "sex", "birthDate", "stage", "phase", "effectiveDate"],
        patient_rows,
    )?;

    // treatment events: pairwise-distinct base rows
    let cancer_vocab = cancer_reference_vocabulary();
    let proc_vocab = procedure_reference_vocabulary();
    let mut base_rows: Vec<Vec<String>> = Vec::with_capacity(spec.facts);
    let mut seen_rows: HashSet<String> = HashSet::with_capacity(spec.facts);
    for _ in 0..spec.facts {
        loop {
            let p = rng.gen_range(0..spec.patients);
            let (_, cancer_name, _) = CANCERS[rng.gen_range(0..CANCERS.len())];
            let cancer_field = synonym_or(&mut rng, cancer_name, CANCER_SYNONYMS);
            let (_, proc_name, _) = PROCEDURES[rng.gen_range(0..PROCEDURES.len())];
            let proc_field = synonym_or(&mut rng, proc_name, PROC_SYNONYMS);
            let date = random_date(&mut rng, first_effective[p], spec.span.1);
            let cost_cents: u64 = rng.gen_range(100_00..=50_000_00);
            let deaths = if rng.gen_bool(0.05) { "1" } else { "0" };
            let row = vec![
                format!("P{:05}", p + 1),
                cancer_field,
                proc_field,
                format_dmy(date),
                format_cost(cost_cents),
                deaths.to_string(),
                "1".to_string(),
            ];
            let key = row.join("\u{1f}");
            if seen_rows.insert(key) {
                base_rows.push(row);
                break;
            }
        }
    }

    // choose duplicate rows, then typo targets among the remaining rows
    let dup_count = (spec.facts as f64 * spec.dup_rate).round() as usize;
    let typo_count = (spec.facts as f64 * spec.typo_rate).round() as usize;
    let mut indices: Vec<usize> = (0..spec.facts).collect();
    indices.shuffle(&mut rng);
    let dup_set: HashSet<usize> = indices[..dup_count].iter().copied().collect();
    let mut typo_pairs: Vec<(usize, usize)> = Vec::new(); // (row, field column 1|2)
    {
        let candidates: Vec<usize> = indices[dup_count..].to_vec();
        let mut pairs: Vec<(usize, usize)> = candidates
            .iter()
            .flat_map(|&r| [(r, 1usize), (r, 2usize)])
            .collect();
        pairs.shuffle(&mut rng);
        typo_pairs.extend(pairs.into_iter().take(typo_count));
        typo_pairs.sort_unstable();
    }
    if typo_pairs.len() < typo_count {
        return Err(EvalError::InvalidSpec(
            "typo rate too high for the requested fact count".to_string(),
        ));
    }

    let mut typo_truth: Vec<(usize, usize, String, String)> = Vec::new(); // row, col, original, corrupted
    for (row, col) in typo_pairs {
        let original = base_rows[row][col].clone();
        let vocab = if col == 1 { &cancer_vocab } else { &proc_vocab };
        let corrupted = corrupt_recoverably(&mut rng, &original, vocab);
        base_rows[row][col] = corrupted.clone();
        typo_truth.push((row, col, original, corrupted));
    }

    // lay rows out, duplicates immediately after their originals
    let columns = ["patientNo", "cancerName", "procName", "treatDate", "cost", "deaths", "patients"];
    let mut emitted: Vec<Vec<String>> = Vec::with_capacity(spec.facts + dup_count);
    let mut line_of_row: Vec<u64> = vec![0; spec.facts];
    let mut truth: Vec<TruthRecord> = Vec::new();
    let file_name = "treatments.csv".to_string();
    for (row_idx, row) in base_rows.iter().enumerate() {
        emitted.push(row.clone());
        let line = emitted.len() as u64 + 1; // header is line 1
        line_of_row[row_idx] = line;
        if dup_set.contains(&row_idx) {
            emitted.push(row.clone());
            truth.push(TruthRecord {
                lineage: Lineage { file: file_name.clone(), line: line + 1 },
                field: TRUTH_DUP_FIELD.to_string(),
                original: line.to_string(),
                corrupted: String::new(),
            });
        }
    }
    for (row, col, original, corrupted) in typo_truth {
        truth.push(TruthRecord {
            lineage: Lineage { file: file_name.clone(), line: line_of_row[row] },
            field: columns[col].to_string(),
            original,
            corrupted,
        });
    }
    truth.sort_by(|a, b| (a.lineage.line, &a.field).cmp(&(b.lineage.line, &b.field)));

    let treatments = dir.join("treatments.csv");
    write_csv(&treatments, &columns, emitted)?;

    let truth_file = dir.join("truth.tsv");
    write_truth(&truth_file, &truth)?;

    Ok(GeneratedDataset {
        dir: dir.to_path_buf(),
        source_files: vec![dates, cancer_types, procedures, patients, treatments],
        schema_file,
        mapping_file,
        truth_file,
        seeded_typos: typo_count,
        seeded_duplicates: dup_count,
    })
}

/// The vocabulary cleansing will see for cancer-name fields once the
/// reference dimensions are loaded: codes, names, organs, crossref variants.
pub fn cancer_reference_vocabulary() -> Vec<String> {
    let mut vocab: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for (code, name, organ) in CANCERS {
        vocab.insert(code.to_string());
        vocab.insert(name.to_string());
        vocab.insert(organ.to_string());
    }
    for (variant, _) in CANCER_SYNONYMS {
        vocab.insert(variant.to_string());
    }
    vocab.into_iter().collect()
}

pub fn procedure_reference_vocabulary() -> Vec<String> {
    let mut vocab: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for (code, name, kind) in PROCEDURES {
        vocab.insert(code.to_string());
        vocab.insert(name.to_string());
        vocab.insert(kind.to_string());
    }
    for (variant, _) in PROC_SYNONYMS {
        vocab.insert(variant.to_string());
    }
    vocab.into_iter().collect()
}

/// Corrupt `original` by one random edit so that (a) the result is not a
/// vocabulary entry and (b) its unique best match at the default threshold is
/// `original`. Guarantees seeded typos are exactly recoverable.
fn corrupt_recoverably(rng: &mut ChaCha8Rng, original: &str, vocab: &[String]) -> String {
    let vocab_set: HashSet<&str> = vocab.iter().map(String::as_str).collect();
    for _ in 0..200 {
        let candidate = single_edit(rng, original);
        if candidate == original || vocab_set.contains(candidate.as_str()) {
            continue;
        }
        let own = similarity(&candidate, original);
        if own < DEFAULT_THRESHOLD {
            continue;
        }
        let unique_best = vocab
            .iter()
            .filter(|entry| fold(entry) != fold(original))
            .all(|entry| similarity(&candidate, entry) < own);
        if unique_best {
            return candidate;
        }
    }
    panic!("could not corrupt {original:?} recoverably; vocabulary too dense");
}

fn single_edit(rng: &mut ChaCha8Rng, s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let alphabet = "abcdefghijklmnopqrstuvwxyz";
    let random_letter = |rng: &mut ChaCha8Rng| {
        alphabet
            .chars()
            .nth(rng.gen_range(0..alphabet.len()))
            .expect("alphabet is non-empty")
    };
    match rng.gen_range(0..4) {
        0 => {
            // substitute
            let i = rng.gen_range(0..chars.len());
            chars[i] = random_letter(rng);
        }
        1 => {
            // insert
            let i = rng.gen_range(0..=chars.len());
            chars.insert(i, random_letter(rng));
        }
        2 => {
            // delete
            if chars.len() > 1 {
                let i = rng.gen_range(0..chars.len());
                chars.remove(i);
            }
        }
        _ => {
            // transpose adjacent
            if chars.len() > 1 {
                let i = rng.gen_range(0..chars.len() - 1);
                chars.swap(i, i + 1);
            }
        }
    }
    chars.into_iter().collect()
}

fn synonym_or(rng: &mut ChaCha8Rng, canonical: &str, synonyms: &[(&str, &str)]) -> String {
    // canonical code for the name so we can find its synonyms
    if rng.gen_bool(0.1) {
        let code = CANCERS
            .iter()
            .chain(PROCEDURES.iter())
            .find(|(_, n, _)| *n == canonical)
            .map(|(c, _, _)| *c);
        if let Some(code) = code {
            let options: Vec<&str> = synonyms
                .iter()
                .filter(|(_, c)| *c == code)
                .map(|(v, _)| *v)
                .collect();
            if let Some(pick) = options.choose(rng) {
                return pick.to_string();
            }
        }
    }
    canonical.to_string()
}

fn random_date(rng: &mut ChaCha8Rng, from: Date, to: Date) -> Date {
    let lo = from.day_number();
    let hi = to.day_number();
    Date::from_day_number(rng.gen_range(lo..=hi)).expect("range stays in the calendar")
}

fn format_dmy(d: Date) -> String {
    format!("{:02}/{:02}/{:04}", d.day(), d.month(), d.year())
}

/// Costs carry thousands separators, e.g. `12,345.67`.
fn format_cost(cents: u64) -> String {
    let whole = cents / 100;
    let frac = cents % 100;
    let digits = whole.to_string();
    let mut grouped = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    format!("{grouped}.{frac:02}")
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), EvalError> {
    std::fs::write(path, bytes).map_err(|e| EvalError::Io { path: path.to_path_buf(), source: e })
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| EvalError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) })?;
    let io_err = |e: csv::Error| EvalError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    writer.write_record(header).map_err(io_err)?;
    for row in rows {
        writer.write_record(&row).map_err(io_err)?;
    }
    writer.flush().map_err(|e| EvalError::Io { path: path.to_path_buf(), source: e })
}

pub fn write_truth(path: &Path, records: &[TruthRecord]) -> Result<(), EvalError> {
    let mut out = String::from("# oncodw-truth v1\n");
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            escape(&r.lineage.to_string()),
            escape(&r.field),
            escape(&r.original),
            escape(&r.corrupted)
        );
    }
    write(path, out.as_bytes())
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRecord>, EvalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EvalError::Io { path: path.to_path_buf(), source: e })?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| EvalError::TruthFormat {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: msg.to_string(),
        };
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(bad("expected 4 tab-separated fields"));
        }
        let lineage_text = unescape(parts[0]).map_err(|m| bad(&m))?;
        let (file, line_no) = lineage_text
            .rsplit_once(':')
            .ok_or_else(|| bad("lineage must look like file:line"))?;
        records.push(TruthRecord {
            lineage: Lineage {
                file: file.to_string(),
                line: line_no.parse().map_err(|_| bad("bad line number"))?,
            },
            field: unescape(parts[1]).map_err(|m| bad(&m))?,
            original: unescape(parts[2]).map_err(|m| bad(&m))?,
            corrupted: unescape(parts[3]).map_err(|m| bad(&m))?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::etl::damerau_levenshtein;

    fn read_bytes(dataset: &GeneratedDataset) -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<PathBuf> = dataset.source_files.clone();
        files.push(dataset.truth_file.clone());
        files
            .into_iter()
            .map(|p| {
                let name = p.file_name().unwrap().to_string_lossy().into_owned();
                (name, std::fs::read(&p).unwrap())
            })
            .collect()
    }

    #[test]
    fn same_seed_gives_byte_identical_bundles() {
        let spec = SyntheticDatasetSpec {
            patients: 20,
            facts: 150,
            ..SyntheticDatasetSpec::default()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let a = generate_dataset(&spec, d1.path()).unwrap();
        let b = generate_dataset(&spec, d2.path()).unwrap();
        assert_eq!(read_bytes(&a), read_bytes(&b));
    }

    #[test]
    fn zero_typo_rate_records_no_corruptions() {
        let spec = SyntheticDatasetSpec {
            patients: 10,
            facts: 50,
            typo_rate: 0.0,
            dup_rate: 0.0,
            ..SyntheticDatasetSpec::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let dataset = generate_dataset(&spec, dir.path()).unwrap();
        let truth = read_truth(&dataset.truth_file).unwrap();
        assert!(truth.is_empty());
    }

    #[test]
    fn rates_are_rounded_to_exact_counts() {
        let spec = SyntheticDatasetSpec {
            patients: 10,
            facts: 100,
            typo_rate: 0.05,
            dup_rate: 0.03,
            ..SyntheticDatasetSpec::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let dataset = generate_dataset(&spec, dir.path()).unwrap();
        assert_eq!(dataset.seeded_typos, 5);
        assert_eq!(dataset.seeded_duplicates, 3);
        let truth = read_truth(&dataset.truth_file).unwrap();
        let dups = truth.iter().filter(|t| t.field == TRUTH_DUP_FIELD).count();
        let typos = truth.len() - dups;
        assert_eq!(dups, 3);
        assert_eq!(typos, 5);
    }

    #[test]
    fn vocabulary_entries_match_the_reference_schema_crossrefs() {
        let schema = crate::schema::parse_schema(crate::reference_schema_text()).unwrap();
        let cancer_map = &schema.crossref("DimCancerType").unwrap().entries;
        for (code, name, _) in CANCERS {
            assert_eq!(cancer_map.get(*name).map(String::as_str), Some(*code));
        }
        for (variant, code) in CANCER_SYNONYMS {
            assert_eq!(cancer_map.get(*variant).map(String::as_str), Some(*code));
        }
        let proc_map = &schema.crossref("DimProcedure").unwrap().entries;
        for (code, name, _) in PROCEDURES {
            assert_eq!(proc_map.get(*name).map(String::as_str), Some(*code));
        }
        for (variant, code) in PROC_SYNONYMS {
            assert_eq!(proc_map.get(*variant).map(String::as_str), Some(*code));
        }
    }

    #[test]
    fn canonical_names_are_well_separated() {
        // canonical name fields must sit at edit distance >= 3 so a single
        // seeded edit can never be ambiguous between two canonical names
        let names: Vec<&str> = CANCERS
            .iter()
            .map(|(_, n, _)| *n)
            .chain(PROCEDURES.iter().map(|(_, n, _)| *n))
            .collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let d = damerau_levenshtein(&fold(a), &fold(b));
                assert!(d >= 3, "{a:?} and {b:?} are only {d} edits apart");
            }
        }
    }

    #[test]
    fn corruptions_are_single_edits_and_recoverable() {
        let spec = SyntheticDatasetSpec {
            patients: 20,
            facts: 300,
            typo_rate: 0.1,
            ..SyntheticDatasetSpec::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let dataset = generate_dataset(&spec, dir.path()).unwrap();
        let truth = read_truth(&dataset.truth_file).unwrap();
        let cancer_vocab = cancer_reference_vocabulary();
        let proc_vocab = procedure_reference_vocabulary();
        let mut saw_typos = false;
        for t in truth.iter().filter(|t| t.field != TRUTH_DUP_FIELD) {
            saw_typos = true;
            assert!(damerau_levenshtein(&fold(&t.original), &fold(&t.corrupted)) <= 1);
            let vocab = if t.field == "cancerName" { &cancer_vocab } else { &proc_vocab };
            match crate::etl::fuzzy_lookup(&t.corrupted, vocab, DEFAULT_THRESHOLD) {
                crate::etl::LookupOutcome::Match { entry, .. } => {
                    assert_eq!(fold(&entry), fold(&t.original), "corrupted {:?}", t.corrupted)
                }
                other => panic!("unrecoverable corruption {:?}: {other:?}", t.corrupted),
            }
        }
        assert!(saw_typos);
    }

    #[test]
    fn cost_formatting_groups_thousands() {
        assert_eq!(format_cost(100_00), "100.00");
        assert_eq!(format_cost(1_500_00), "1,500.00");
        assert_eq!(format_cost(12_345_67), "12,345.67");
        assert_eq!(format_cost(5), "0.05");
    }
}
