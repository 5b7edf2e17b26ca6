//! On-disk warehouse layout.
//!
//! A warehouse directory holds `schema.star` (canonical schema text),
//! one rewritable `dim_<Name>.tbl` per dimension, append-only fact segment
//! files `fact_<Name>.segNNNNN`, and `manifest.tsv` written last — a load is
//! durable only once the manifest references it. Segments written by earlier
//! persists are never rewritten. Record files group values column by column;
//! the exact encoding is documented in `docs/warehouse-layout.md`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::date::Date;
use crate::schema::print_schema;
use crate::textenc::{escape, unescape};
use crate::value::{AttributeKind, Value};

use super::{DimensionRow, PersistState, StoreError, SurrogateKey, ValidityInterval, Warehouse};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const SCHEMA_FILE: &str = "schema.star";
pub const FORMAT_VERSION: u32 = 1;

const OPEN_SENTINEL: &str = "OPEN";

impl Warehouse {
    /// Write the warehouse to `dir`. A fresh directory receives the full
    /// layout; the directory this warehouse was opened from (or previously
    /// persisted to) receives rewritten dimension tables plus one new fact
    /// segment holding the rows appended since the last persist. Any other
    /// initialized directory is refused.
    pub fn persist(&mut self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let schema_text = print_schema(self.schema());
        let schema_hash = sha256_hex(schema_text.as_bytes());

        let mut segments: Vec<(String, usize)>;
        if manifest_path.exists() {
            let ours = match self.persist_state() {
                Some(ps) if same_path(&ps.dir, dir) => ps.clone(),
                _ => return Err(StoreError::ForeignDirectory(dir.to_path_buf())),
            };
            let disk = read_manifest(dir)?;
            if disk.schema_hash != schema_hash || disk.segments != ours.segments {
                return Err(StoreError::ForeignDirectory(dir.to_path_buf()));
            }
            segments = ours.segments;
            let delta = self.fact_count() - ours.persisted_facts;
            if delta > 0 {
                let name = segment_name(&self.schema().fact.name, segments.len() + 1);
                write_fact_segment(self, dir, &name, ours.persisted_facts, self.fact_count())?;
                segments.push((name, delta));
            }
        } else {
            segments = Vec::new();
            write_atomic(&dir.join(SCHEMA_FILE), schema_text.as_bytes())?;
            if self.fact_count() > 0 {
                let name = segment_name(&self.schema().fact.name, 1);
                write_fact_segment(self, dir, &name, 0, self.fact_count())?;
                segments.push((name, self.fact_count()));
            }
        }

        for dim in &self.schema().dimensions {
            let rows = self.dimension_rows(&dim.name)?;
            let text = render_dim_table(dim.name.as_str(), self, rows)?;
            write_atomic(&dir.join(dim_file_name(&dim.name)), text.as_bytes())?;
        }

        let mut manifest = String::new();
        let _ = writeln!(manifest, "oncodw\t{FORMAT_VERSION}");
        let _ = writeln!(manifest, "schema\t{schema_hash}");
        for dim in &self.schema().dimensions {
            let _ = writeln!(
                manifest,
                "dim\t{}\t{}\t{}",
                dim.name,
                self.dimension_rows(&dim.name)?.len(),
                self.dimension_next_key(&dim.name)?
            );
        }
        for (name, rows) in &segments {
            let _ = writeln!(manifest, "seg\t{name}\t{rows}");
        }
        let _ = writeln!(manifest, "facts\t{}", self.fact_count());
        manifest.push_str("end\n");
        write_atomic(&manifest_path, manifest.as_bytes())?;

        self.set_persist_state(PersistState {
            dir: dir.to_path_buf(),
            segments,
            persisted_facts: self.fact_count(),
        });
        Ok(())
    }

    /// Load a warehouse from a directory produced by [`Warehouse::persist`].
    pub fn open(dir: &Path) -> Result<Warehouse, StoreError> {
        let manifest = read_manifest(dir)?;
        let schema_path = dir.join(SCHEMA_FILE);
        let schema_text =
            fs::read_to_string(&schema_path).map_err(|e| io_err(&schema_path, e))?;
        if sha256_hex(schema_text.as_bytes()) != manifest.schema_hash {
            return Err(corrupt(&schema_path, "schema text does not match manifest hash"));
        }
        let schema = crate::schema::parse_schema(&schema_text)?;
        let mut wh = Warehouse::new(schema)?;

        if manifest.dims.len() != wh.schema().dimensions.len() {
            return Err(corrupt(&dir.join(MANIFEST_FILE), "dimension list does not match schema"));
        }
        for dim in &wh.schema().dimensions.clone() {
            let (rows_expected, next_key) = *manifest
                .dims
                .get(&dim.name)
                .ok_or_else(|| corrupt(&dir.join(MANIFEST_FILE), &format!("no entry for dimension {:?}", dim.name)))?;
            let path = dir.join(dim_file_name(&dim.name));
            let rows = read_dim_table(&path, dim.name.as_str(), wh.schema(), rows_expected)?;
            if next_key != rows.len() as u64 + 1 {
                return Err(corrupt(&path, "key counter does not match row count"));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.key.value() != i as u64 + 1 {
                    return Err(corrupt(&path, "surrogate keys are not consecutive from 1"));
                }
            }
            wh.restore_dimension_table(&dim.name, rows, next_key);
        }

        let dim_count = wh.schema().fact.dimension_refs.len();
        let measure_count = wh.schema().fact.base_measures().count();
        let mut dim_cols: Vec<Vec<u64>> = vec![Vec::new(); dim_count];
        let mut measure_cols: Vec<Vec<f64>> = vec![Vec::new(); measure_count];
        for (name, rows) in &manifest.segments {
            let path = dir.join(name);
            read_fact_segment(&path, &wh, *rows, &mut dim_cols, &mut measure_cols)?;
        }
        let total: usize = manifest.segments.iter().map(|(_, n)| n).sum();
        if total != manifest.facts {
            return Err(corrupt(&dir.join(MANIFEST_FILE), "segment counts do not sum to fact total"));
        }
        wh.restore_fact_columns(dim_cols, measure_cols);

        wh.set_persist_state(PersistState {
            dir: dir.to_path_buf(),
            segments: manifest.segments,
            persisted_facts: total,
        });
        Ok(wh)
    }
}

struct Manifest {
    schema_hash: String,
    dims: BTreeMap<String, (usize, u64)>,
    segments: Vec<(String, usize)>,
    facts: usize,
}

fn read_manifest(dir: &Path) -> Result<Manifest, StoreError> {
    let path = dir.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(StoreError::NotInitialized(dir.to_path_buf()))
        }
        Err(e) => return Err(io_err(&path, e)),
    };
    let mut lines = text.lines();
    match lines.next().map(|l| l.split('\t').collect::<Vec<_>>()) {
        Some(parts) if parts.as_slice() == ["oncodw", "1"] => {}
        _ => return Err(corrupt(&path, "bad magic or unsupported format version")),
    }
    let mut schema_hash = None;
    let mut dims = BTreeMap::new();
    let mut segments = Vec::new();
    let mut facts = None;
    let mut terminated = false;
    for line in lines {
        let parts: Vec<&str> = line.split('\t').collect();
        match parts.as_slice() {
            ["schema", h] => schema_hash = Some(h.to_string()),
            ["dim", name, rows, next] => {
                let rows = rows.parse().map_err(|_| corrupt(&path, "bad dim row count"))?;
                let next = next.parse().map_err(|_| corrupt(&path, "bad dim key counter"))?;
                dims.insert(name.to_string(), (rows, next));
            }
            ["seg", name, rows] => {
                let rows = rows.parse().map_err(|_| corrupt(&path, "bad segment row count"))?;
                segments.push((name.to_string(), rows));
            }
            ["facts", n] => {
                facts = Some(n.parse().map_err(|_| corrupt(&path, "bad fact total"))?)
            }
            ["end"] => {
                terminated = true;
                break;
            }
            _ => return Err(corrupt(&path, &format!("unrecognized manifest line {line:?}"))),
        }
    }
    if !terminated {
        return Err(corrupt(&path, "truncated manifest (missing end marker)"));
    }
    Ok(Manifest {
        schema_hash: schema_hash.ok_or_else(|| corrupt(&path, "missing schema hash"))?,
        dims,
        segments,
        facts: facts.ok_or_else(|| corrupt(&path, "missing fact total"))?,
    })
}

fn render_dim_table(
    name: &str,
    wh: &Warehouse,
    rows: &[DimensionRow],
) -> Result<String, StoreError> {
    let def = wh.schema().dimension(name).expect("caller passes a schema dimension");
    let mut out = String::new();
    let _ = writeln!(out, "dimtable\t{name}\t{}", rows.len());
    out.push_str("col\tkey\n");
    for r in rows {
        let _ = writeln!(out, "{}", r.key.value());
    }
    out.push_str("col\tnatural\n");
    for r in rows {
        let _ = writeln!(out, "{}", escape(&r.natural_key));
    }
    out.push_str("col\tstart\n");
    for r in rows {
        let _ = writeln!(out, "{}", r.validity.start);
    }
    out.push_str("col\tend\n");
    for r in rows {
        match r.validity.end {
            Some(d) => {
                let _ = writeln!(out, "{d}");
            }
            None => out.push_str(concat!("OPEN", "\n")),
        }
    }
    for attr in &def.attributes {
        let _ = writeln!(out, "col\tattr\t{}\t{}", attr.name, attr.kind);
        for r in rows {
            let _ = writeln!(out, "{}", escape(&r.attributes[&attr.name].render()));
        }
    }
    Ok(out)
}

fn read_dim_table(
    path: &Path,
    name: &str,
    schema: &crate::schema::StarSchema,
    expected_rows: usize,
) -> Result<Vec<DimensionRow>, StoreError> {
    let def = schema
        .dimension(name)
        .ok_or_else(|| corrupt(path, "table for a dimension missing from the schema"))?;
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    if header.len() != 3 || header[0] != "dimtable" || header[1] != name {
        return Err(corrupt(path, "bad dimension table header"));
    }
    let n: usize = header[2].parse().map_err(|_| corrupt(path, "bad row count"))?;
    if n != expected_rows {
        return Err(corrupt(path, "row count does not match manifest"));
    }

    let mut read_col = |marker: &[&str]| -> Result<Vec<String>, StoreError> {
        let head: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
        if head.len() != marker.len() + 1 || head[0] != "col" || head[1..] != marker[..] {
            return Err(corrupt(path, &format!("expected column header for {marker:?}")));
        }
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| corrupt(path, "table file truncated inside a column"))?;
            vals.push(line.to_string());
        }
        Ok(vals)
    };

    let keys = read_col(&["key"])?;
    let naturals = read_col(&["natural"])?;
    let starts = read_col(&["start"])?;
    let ends = read_col(&["end"])?;
    let mut attr_cols: Vec<(String, AttributeKind, Vec<String>)> = Vec::new();
    for attr in &def.attributes {
        let kind_name = attr.kind.name();
        let vals = read_col(&["attr", &attr.name, kind_name])?;
        attr_cols.push((attr.name.clone(), attr.kind, vals));
    }

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let key: u64 = keys[i].parse().map_err(|_| corrupt(path, "bad surrogate key"))?;
        let natural_key = unescape(&naturals[i]).map_err(|m| corrupt(path, &m))?;
        let start = Date::parse_iso(&starts[i]).map_err(|_| corrupt(path, "bad start date"))?;
        let end = if ends[i] == OPEN_SENTINEL {
            None
        } else {
            Some(Date::parse_iso(&ends[i]).map_err(|_| corrupt(path, "bad end date"))?)
        };
        let mut attributes = BTreeMap::new();
        for (attr_name, kind, vals) in &attr_cols {
            let raw = unescape(&vals[i]).map_err(|m| corrupt(path, &m))?;
            let value = Value::parse(*kind, &raw)
                .map_err(|e| corrupt(path, &format!("attribute {attr_name:?}: {e}")))?;
            attributes.insert(attr_name.clone(), value);
        }
        rows.push(DimensionRow {
            key: SurrogateKey(key),
            natural_key,
            attributes,
            validity: ValidityInterval { start, end },
        });
    }
    Ok(rows)
}

fn write_fact_segment(
    wh: &Warehouse,
    dir: &Path,
    name: &str,
    from: usize,
    to: usize,
) -> Result<(), StoreError> {
    let fact = &wh.schema().fact;
    let mut out = String::new();
    let _ = writeln!(out, "factseg\t{}\t{}", fact.name, to - from);
    for (pos, dim) in fact.dimension_refs.iter().enumerate() {
        let _ = writeln!(out, "col\tdim\t{dim}");
        for v in &wh.fact_dim_column_by_pos(pos)[from..to] {
            let _ = writeln!(out, "{v}");
        }
    }
    for (pos, m) in fact.base_measures().enumerate() {
        let _ = writeln!(out, "col\tmeasure\t{}", m.name);
        for v in &wh.fact_measure_column_by_pos(pos)[from..to] {
            let _ = writeln!(out, "{v}");
        }
    }
    write_atomic(&dir.join(name), out.as_bytes())
}

fn read_fact_segment(
    path: &Path,
    wh: &Warehouse,
    expected_rows: usize,
    dim_cols: &mut [Vec<u64>],
    measure_cols: &mut [Vec<f64>],
) -> Result<(), StoreError> {
    let fact = &wh.schema().fact;
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    if header.len() != 3 || header[0] != "factseg" || header[1] != fact.name {
        return Err(corrupt(path, "bad fact segment header"));
    }
    let n: usize = header[2].parse().map_err(|_| corrupt(path, "bad row count"))?;
    if n != expected_rows {
        return Err(corrupt(path, "row count does not match manifest"));
    }

    for (pos, dim) in fact.dimension_refs.iter().enumerate() {
        let head: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
        if head.as_slice() != ["col", "dim", dim.as_str()] {
            return Err(corrupt(path, &format!("expected dim column {dim:?}")));
        }
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| corrupt(path, "segment truncated"))?;
            let key: u64 = line.parse().map_err(|_| corrupt(path, "bad key value"))?;
            dim_cols[pos].push(key);
        }
    }
    for (pos, m) in fact.base_measures().enumerate() {
        let head: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
        if head.as_slice() != ["col", "measure", m.name.as_str()] {
            return Err(corrupt(path, &format!("expected measure column {:?}", m.name)));
        }
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| corrupt(path, "segment truncated"))?;
            let v: f64 = line.parse().map_err(|_| corrupt(path, "bad measure value"))?;
            if !v.is_finite() {
                return Err(corrupt(path, "non-finite measure value"));
            }
            measure_cols[pos].push(v);
        }
    }
    Ok(())
}

fn dim_file_name(dim: &str) -> String {
    format!("dim_{dim}.tbl")
}

fn segment_name(fact: &str, index: usize) -> String {
    format!("fact_{fact}.seg{index:05}")
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn same_path(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io { path: path.to_path_buf(), source }
}

fn corrupt(path: &Path, msg: &str) -> StoreError {
    StoreError::Corrupt { path: path.to_path_buf(), msg: msg.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::Date;
    use crate::schema::parse_schema;
    use crate::value::Value;
    use std::collections::BTreeMap;

    fn small_warehouse() -> Warehouse {
        let schema = parse_schema(crate::reference_schema_text()).unwrap();
        let mut wh = Warehouse::new(schema).unwrap();
        let attrs: BTreeMap<String, Value> = [
            ("cancerCode", Value::Text("C91".into())),
            ("cancerName", Value::Text("Leuk\temia\nodd".into())), // exercise escaping
            ("organ", Value::Text("Blood".into())),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        wh.upsert_dimension_row("DimCancerType", "C91", attrs, Date::new(1900, 1, 1).unwrap())
            .unwrap();
        wh
    }

    #[test]
    fn persist_open_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut wh = small_warehouse();
        wh.persist(dir.path()).unwrap();
        let opened = Warehouse::open(dir.path()).unwrap();
        assert!(wh.same_observable_state(&opened));
    }

    #[test]
    fn open_empty_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            Warehouse::open(dir.path()),
            Err(StoreError::NotInitialized(_))
        ));
    }

    #[test]
    fn truncated_manifest_is_reported_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let mut wh = small_warehouse();
        wh.persist(dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(
            Warehouse::open(dir.path()),
            Err(StoreError::Corrupt { .. })
        ));
    }

    #[test]
    fn persist_into_foreign_directory_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut wh = small_warehouse();
        wh.persist(dir.path()).unwrap();
        let mut other = small_warehouse();
        assert!(matches!(
            other.persist(dir.path()),
            Err(StoreError::ForeignDirectory(_))
        ));
    }

    #[test]
    fn escape_round_trip() {
        for s in ["", "plain", "a\tb", "line\nbreak", "back\\slash", "\\n literal"] {
            assert_eq!(unescape(&escape(s)).unwrap(), s);
        }
    }
}
