//! Append-only warehouse storage.
//!
//! A [`Warehouse`] owns one dimension table per schema dimension plus the
//! fact table, kept column-grouped in memory to favor aggregation scans.
//! Surrogate keys are generated per table, seeded at 1 with step 1, so each
//! table's keys are always exactly `1..=n`. Dimension rows carry half-open
//! validity intervals `[start, end)`; history-tracked (SCD2) dimensions close
//! the current row and open a successor when attributes change — the sole
//! sanctioned mutation. Facts are immutable once appended: no public
//! operation rewrites or removes one.
//!
//! # Concurrency
//!
//! Single writer, multiple readers, enforced by the borrow system: loads take
//! `&mut Warehouse`, queries take `&Warehouse`. A shared borrow is a
//! consistent snapshot — no load can be applied while any reader holds one,
//! so readers never observe a partially applied load.

mod persist;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::date::Date;
use crate::schema::{DimensionDef, SchemaError, StarSchema};
use crate::value::{AttributeKind, Value};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("dimension {dim:?} has no attribute {attr:?}")]
    UnknownAttribute { dim: String, attr: String },
    #[error("dimension {dim:?} row is missing attribute {attr:?}")]
    MissingAttribute { dim: String, attr: String },
    #[error("dimension {dim:?} attribute {attr:?} expects {expected}, got {got:?}")]
    KindMismatch { dim: String, attr: String, expected: AttributeKind, got: String },
    #[error("natural key {natural_key:?} does not match key attribute value {attr_value:?}")]
    NaturalKeyMismatch { natural_key: String, attr_value: String },
    #[error(
        "effective date {effective} precedes current row start {open_start} \
         for {dim:?} key {natural_key:?}"
    )]
    EffectivePrecedesOpen { dim: String, natural_key: String, effective: Date, open_start: Date },
    #[error("dimension {dim:?} is not history-tracked; attributes of key {natural_key:?} differ")]
    NonScd2Change { dim: String, natural_key: String },
    #[error(
        "cannot close and reopen {dim:?} key {natural_key:?} at its own start date {effective}"
    )]
    SameDayChange { dim: String, natural_key: String, effective: Date },
    #[error("fact is missing a natural key for dimension {dim:?}")]
    MissingDimensionRef { dim: String },
    #[error("no {dim:?} row for natural key {natural_key:?} covers {at}")]
    UnresolvedNaturalKey { dim: String, natural_key: String, at: Date },
    #[error("unknown measure {0:?}")]
    UnknownMeasure(String),
    #[error("fact is missing base measure {0:?}")]
    MissingMeasure(String),
    #[error("measure {0:?} is derived and cannot be stored")]
    DerivedMeasure(String),
    #[error("measure {0:?} is not a finite number")]
    NonFiniteMeasure(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("warehouse directory {0:?} is not initialized (no manifest)")]
    NotInitialized(PathBuf),
    #[error("corrupt warehouse data in {path:?}: {msg}")]
    Corrupt { path: PathBuf, msg: String },
    #[error("directory {0:?} holds a different warehouse; open it before persisting into it")]
    ForeignDirectory(PathBuf),
    #[error("i/o error on {path:?}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Table-scoped integer identity, seeded at 1 with step 1.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SurrogateKey(u64);

impl SurrogateKey {
    pub fn value(&self) -> u64 {
        self.0
    }
}

impl fmt::Debug for SurrogateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for SurrogateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Half-open validity `[start, end)`; `end == None` marks the current row.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ValidityInterval {
    pub start: Date,
    pub end: Option<Date>,
}

impl ValidityInterval {
    pub fn open(start: Date) -> Self {
        ValidityInterval { start, end: None }
    }

    pub fn is_open(&self) -> bool {
        self.end.is_none()
    }

    pub fn contains(&self, at: Date) -> bool {
        at >= self.start && self.end.map_or(true, |e| at < e)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct DimensionRow {
    pub key: SurrogateKey,
    pub natural_key: String,
    pub attributes: BTreeMap<String, Value>,
    pub validity: ValidityInterval,
}

/// Row view of a stored fact: surrogate-key references plus base measures.
#[derive(Clone, PartialEq, Debug)]
pub struct FactRow {
    pub dim_keys: BTreeMap<String, SurrogateKey>,
    pub measures: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
struct DimensionTable {
    /// Rows in key order: `rows[k-1].key == k`.
    rows: Vec<DimensionRow>,
    /// Natural key -> row indices, chronological per key.
    by_natural: HashMap<String, Vec<usize>>,
    next_key: u64,
}

impl DimensionTable {
    fn new() -> Self {
        DimensionTable { rows: Vec::new(), by_natural: HashMap::new(), next_key: 1 }
    }

    fn open_row_index(&self, natural_key: &str) -> Option<usize> {
        self.by_natural
            .get(natural_key)?
            .iter()
            .copied()
            .find(|&i| self.rows[i].validity.is_open())
    }

    fn push(&mut self, natural_key: &str, attributes: BTreeMap<String, Value>, start: Date) -> SurrogateKey {
        let key = SurrogateKey(self.next_key);
        self.next_key += 1;
        self.by_natural
            .entry(natural_key.to_string())
            .or_default()
            .push(self.rows.len());
        self.rows.push(DimensionRow {
            key,
            natural_key: natural_key.to_string(),
            attributes,
            validity: ValidityInterval::open(start),
        });
        key
    }
}

/// Column-grouped fact storage. Column order follows the schema declaration.
#[derive(Clone, Debug, Default)]
struct FactStore {
    dim_keys: Vec<Vec<u64>>,
    measures: Vec<Vec<f64>>,
    len: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct PersistState {
    pub dir: PathBuf,
    /// Segment file names with their row counts, oldest first.
    pub segments: Vec<(String, usize)>,
    pub persisted_facts: usize,
}

#[derive(Clone, Debug)]
pub struct Warehouse {
    schema: StarSchema,
    dims: BTreeMap<String, DimensionTable>,
    facts: FactStore,
    persist_state: Option<PersistState>,
    /// Test hook: when false, the non-volatility checks in `upsert` are
    /// skipped and forbidden changes silently overwrite. Evaluation probes
    /// rely on the guard being observable.
    mutation_guard: bool,
}

impl Warehouse {
    pub fn new(schema: StarSchema) -> Result<Self, StoreError> {
        schema.validate()?;
        let dims = schema
            .dimensions
            .iter()
            .map(|d| (d.name.clone(), DimensionTable::new()))
            .collect();
        let facts = FactStore {
            dim_keys: vec![Vec::new(); schema.fact.dimension_refs.len()],
            measures: vec![Vec::new(); schema.fact.base_measures().count()],
            len: 0,
        };
        Ok(Warehouse { schema, dims, facts, persist_state: None, mutation_guard: true })
    }

    pub fn schema(&self) -> &StarSchema {
        &self.schema
    }

    fn dim_def(&self, dim: &str) -> Result<&DimensionDef, StoreError> {
        self.schema
            .dimension(dim)
            .ok_or_else(|| StoreError::UnknownDimension(dim.to_string()))
    }

    fn dim_table(&self, dim: &str) -> Result<&DimensionTable, StoreError> {
        self.dims
            .get(dim)
            .ok_or_else(|| StoreError::UnknownDimension(dim.to_string()))
    }

    /// Insert or version a dimension row.
    ///
    /// - unseen natural key: new row `[effective, open)`;
    /// - attribute-identical row already present (any version with the same
    ///   start, or the current row): its key is returned, nothing written;
    /// - SCD2 dimension with changed attributes: the open row is closed at
    ///   `effective` and a successor row opened;
    /// - non-SCD2 dimension with changed attributes: an error.
    pub fn upsert_dimension_row(
        &mut self,
        dim: &str,
        natural_key: &str,
        attributes: BTreeMap<String, Value>,
        effective: Date,
    ) -> Result<SurrogateKey, StoreError> {
        let def = self.dim_def(dim)?.clone();
        conform_attributes(&def, natural_key, &attributes)?;
        let guard = self.mutation_guard;
        let table = self.dims.get_mut(dim).expect("table exists for every schema dimension");

        let Some(indices) = table.by_natural.get(natural_key).cloned() else {
            return Ok(table.push(natural_key, attributes, effective));
        };

        // idempotent re-application of a known version
        for &i in &indices {
            let row = &table.rows[i];
            if row.validity.start == effective && row.attributes == attributes {
                return Ok(row.key);
            }
        }

        let open_idx = table
            .open_row_index(natural_key)
            .expect("every stored natural key has exactly one open row");
        if table.rows[open_idx].attributes == attributes {
            return Ok(table.rows[open_idx].key);
        }

        let open_start = table.rows[open_idx].validity.start;
        if !guard {
            // patched store (test hook): overwrite in place
            table.rows[open_idx].attributes = attributes;
            return Ok(table.rows[open_idx].key);
        }
        if effective < open_start {
            return Err(StoreError::EffectivePrecedesOpen {
                dim: dim.to_string(),
                natural_key: natural_key.to_string(),
                effective,
                open_start,
            });
        }
        if !def.scd2 {
            return Err(StoreError::NonScd2Change {
                dim: dim.to_string(),
                natural_key: natural_key.to_string(),
            });
        }
        if effective == open_start {
            return Err(StoreError::SameDayChange {
                dim: dim.to_string(),
                natural_key: natural_key.to_string(),
                effective,
            });
        }
        table.rows[open_idx].validity.end = Some(effective);
        Ok(table.push(natural_key, attributes, effective))
    }

    /// Fold a source-value variant onto its canonical natural key; unmapped
    /// text passes through unchanged.
    pub fn resolve_crossref(&self, dim: &str, source_text: &str) -> Result<String, StoreError> {
        self.dim_def(dim)?;
        Ok(self
            .schema
            .crossref(dim)
            .and_then(|cr| cr.entries.get(source_text))
            .cloned()
            .unwrap_or_else(|| source_text.to_string()))
    }

    /// The unique row whose validity interval contains `at`, if any.
    pub fn point_in_time(
        &self,
        dim: &str,
        natural_key: &str,
        at: Date,
    ) -> Result<Option<&DimensionRow>, StoreError> {
        let table = self.dim_table(dim)?;
        let Some(indices) = table.by_natural.get(natural_key) else {
            return Ok(None);
        };
        Ok(indices
            .iter()
            .map(|&i| &table.rows[i])
            .find(|r| r.validity.contains(at)))
    }

    /// The current (open-validity) row for a natural key, if any.
    pub fn current_row(&self, dim: &str, natural_key: &str) -> Result<Option<&DimensionRow>, StoreError> {
        let table = self.dim_table(dim)?;
        Ok(table.open_row_index(natural_key).map(|i| &table.rows[i]))
    }

    /// Append one immutable fact. Each natural key is resolved to the
    /// dimension row valid at `as_of`; the stored row references those keys.
    pub fn append_fact(
        &mut self,
        dim_naturals: &BTreeMap<String, String>,
        measures: &BTreeMap<String, f64>,
        as_of: Date,
    ) -> Result<FactRow, StoreError> {
        for dim in dim_naturals.keys() {
            if !self.schema.fact.dimension_refs.contains(dim) {
                return Err(StoreError::UnknownDimension(dim.clone()));
            }
        }
        let mut dim_keys = BTreeMap::new();
        let mut key_by_pos = Vec::with_capacity(self.schema.fact.dimension_refs.len());
        for dim in &self.schema.fact.dimension_refs {
            let natural = dim_naturals
                .get(dim)
                .ok_or_else(|| StoreError::MissingDimensionRef { dim: dim.clone() })?;
            let row = self.point_in_time(dim, natural, as_of)?.ok_or_else(|| {
                StoreError::UnresolvedNaturalKey {
                    dim: dim.clone(),
                    natural_key: natural.clone(),
                    at: as_of,
                }
            })?;
            key_by_pos.push(row.key.value());
            dim_keys.insert(dim.clone(), row.key);
        }

        for name in measures.keys() {
            match self.schema.fact.measure(name) {
                None => return Err(StoreError::UnknownMeasure(name.clone())),
                Some(m) if !m.kind.is_base() => {
                    return Err(StoreError::DerivedMeasure(name.clone()))
                }
                Some(_) => {}
            }
        }
        let mut measure_by_pos = Vec::with_capacity(self.facts.measures.len());
        let mut stored = BTreeMap::new();
        for m in self.schema.fact.base_measures() {
            let v = *measures
                .get(&m.name)
                .ok_or_else(|| StoreError::MissingMeasure(m.name.clone()))?;
            if !v.is_finite() {
                return Err(StoreError::NonFiniteMeasure(m.name.clone()));
            }
            measure_by_pos.push(v);
            stored.insert(m.name.clone(), v);
        }

        for (col, key) in self.facts.dim_keys.iter_mut().zip(&key_by_pos) {
            col.push(*key);
        }
        for (col, v) in self.facts.measures.iter_mut().zip(&measure_by_pos) {
            col.push(*v);
        }
        self.facts.len += 1;
        Ok(FactRow { dim_keys, measures: stored })
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len
    }

    /// Surrogate-key column for one fact dimension reference.
    pub fn fact_dim_column(&self, dim: &str) -> Result<&[u64], StoreError> {
        let pos = self
            .schema
            .fact
            .dimension_refs
            .iter()
            .position(|d| d == dim)
            .ok_or_else(|| StoreError::UnknownDimension(dim.to_string()))?;
        Ok(&self.facts.dim_keys[pos])
    }

    /// Base-measure column in fact order.
    pub fn fact_measure_column(&self, name: &str) -> Result<&[f64], StoreError> {
        let pos = self
            .schema
            .fact
            .base_measures()
            .position(|m| m.name == name)
            .ok_or_else(|| StoreError::UnknownMeasure(name.to_string()))?;
        Ok(&self.facts.measures[pos])
    }

    /// Row view of the i-th fact.
    pub fn fact_row(&self, index: usize) -> FactRow {
        let dim_keys = self
            .schema
            .fact
            .dimension_refs
            .iter()
            .enumerate()
            .map(|(p, d)| (d.clone(), SurrogateKey(self.facts.dim_keys[p][index])))
            .collect();
        let measures = self
            .schema
            .fact
            .base_measures()
            .enumerate()
            .map(|(p, m)| (m.name.clone(), self.facts.measures[p][index]))
            .collect();
        FactRow { dim_keys, measures }
    }

    pub fn dimension_rows(&self, dim: &str) -> Result<&[DimensionRow], StoreError> {
        Ok(&self.dim_table(dim)?.rows)
    }

    /// O(1) lookup by surrogate key (rows are stored in key order).
    pub fn dimension_row_by_key(&self, dim: &str, key: u64) -> Result<Option<&DimensionRow>, StoreError> {
        let table = self.dim_table(dim)?;
        Ok(key
            .checked_sub(1)
            .and_then(|i| table.rows.get(i as usize)))
    }

    pub fn dimension_next_key(&self, dim: &str) -> Result<u64, StoreError> {
        Ok(self.dim_table(dim)?.next_key)
    }

    /// Natural keys of a dimension in first-seen order.
    pub fn natural_keys(&self, dim: &str) -> Result<Vec<&str>, StoreError> {
        let table = self.dim_table(dim)?;
        let mut seen = std::collections::HashSet::new();
        Ok(table
            .rows
            .iter()
            .filter(|r| seen.insert(r.natural_key.as_str()))
            .map(|r| r.natural_key.as_str())
            .collect())
    }

    /// Observable-state equality: schema, rows, keys, counters and facts.
    /// Persist bookkeeping is ignored.
    pub fn same_observable_state(&self, other: &Warehouse) -> bool {
        if self.schema != other.schema || self.facts.len != other.facts.len {
            return false;
        }
        if self.facts.dim_keys != other.facts.dim_keys {
            return false;
        }
        if self
            .facts
            .measures
            .iter()
            .flatten()
            .zip(other.facts.measures.iter().flatten())
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return false;
        }
        self.dims.len() == other.dims.len()
            && self.dims.iter().zip(other.dims.iter()).all(|((an, at), (bn, bt))| {
                an == bn && at.next_key == bt.next_key && at.rows == bt.rows
            })
    }

    #[doc(hidden)]
    pub fn testing_set_mutation_guard(&mut self, enabled: bool) {
        self.mutation_guard = enabled;
    }

    pub(crate) fn persist_state(&self) -> Option<&PersistState> {
        self.persist_state.as_ref()
    }

    pub(crate) fn set_persist_state(&mut self, state: PersistState) {
        self.persist_state = Some(state);
    }

    pub(crate) fn fact_dim_column_by_pos(&self, pos: usize) -> &[u64] {
        &self.facts.dim_keys[pos]
    }

    pub(crate) fn fact_measure_column_by_pos(&self, pos: usize) -> &[f64] {
        &self.facts.measures[pos]
    }

    pub(crate) fn restore_dimension_table(
        &mut self,
        dim: &str,
        rows: Vec<DimensionRow>,
        next_key: u64,
    ) {
        let mut by_natural: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, row) in rows.iter().enumerate() {
            by_natural.entry(row.natural_key.clone()).or_default().push(i);
        }
        self.dims
            .insert(dim.to_string(), DimensionTable { rows, by_natural, next_key });
    }

    pub(crate) fn restore_fact_columns(&mut self, dim_keys: Vec<Vec<u64>>, measures: Vec<Vec<f64>>) {
        let len = dim_keys.first().map_or_else(
            || measures.first().map_or(0, Vec::len),
            Vec::len,
        );
        self.facts = FactStore { dim_keys, measures, len };
    }
}

fn conform_attributes(
    def: &DimensionDef,
    natural_key: &str,
    attributes: &BTreeMap<String, Value>,
) -> Result<(), StoreError> {
    for name in attributes.keys() {
        if def.attribute(name).is_none() {
            return Err(StoreError::UnknownAttribute {
                dim: def.name.clone(),
                attr: name.clone(),
            });
        }
    }
    for attr in &def.attributes {
        let value = attributes.get(&attr.name).ok_or_else(|| StoreError::MissingAttribute {
            dim: def.name.clone(),
            attr: attr.name.clone(),
        })?;
        if value.kind() != attr.kind {
            return Err(StoreError::KindMismatch {
                dim: def.name.clone(),
                attr: attr.name.clone(),
                expected: attr.kind,
                got: value.render(),
            });
        }
    }
    let key_value = &attributes[&def.natural_key];
    if key_value.render() != natural_key {
        return Err(StoreError::NaturalKeyMismatch {
            natural_key: natural_key.to_string(),
            attr_value: key_value.render(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_schema;

    fn schema() -> StarSchema {
        parse_schema(crate::reference_schema_text()).unwrap()
    }

    fn patient_attrs(no: &str, stage: &str) -> BTreeMap<String, Value> {
        [
            ("patientNo", Value::Text(no.into())),
            ("name", Value::Text("Alex Doe".into())),
            ("sex", Value::Text("F".into())),
            ("birthDate", Value::Date(Date::new(1960, 4, 12).unwrap())),
            ("stage", Value::Text(stage.into())),
            ("phase", Value::Text("Treatment".into())),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    fn date(text: &str) -> Date {
        Date::parse_iso(text).unwrap()
    }

    #[test]
    fn identity_seeds_at_one_and_increments() {
        let mut wh = Warehouse::new(schema()).unwrap();
        let k1 = wh
            .upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "II"), date("2010-01-01"))
            .unwrap();
        let k2 = wh
            .upsert_dimension_row("DimPatient", "P002", patient_attrs("P002", "I"), date("2010-01-01"))
            .unwrap();
        assert_eq!(k1.value(), 1);
        assert_eq!(k2.value(), 2);
    }

    #[test]
    fn scd2_close_and_open() {
        let mut wh = Warehouse::new(schema()).unwrap();
        wh.upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "II"), date("2010-01-01"))
            .unwrap();
        // burn a key so the successor lands on 3, as the counter dictates
        wh.upsert_dimension_row("DimPatient", "P002", patient_attrs("P002", "I"), date("2010-01-01"))
            .unwrap();
        let k = wh
            .upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "III"), date("2011-06-01"))
            .unwrap();
        assert_eq!(k.value(), 3);
        let rows = wh.dimension_rows("DimPatient").unwrap();
        let old = &rows[0];
        assert_eq!(old.validity.start, date("2010-01-01"));
        assert_eq!(old.validity.end, Some(date("2011-06-01")));
        let new = &rows[2];
        assert_eq!(new.validity.start, date("2011-06-01"));
        assert!(new.validity.is_open());
    }

    #[test]
    fn identical_upsert_is_a_no_op() {
        let mut wh = Warehouse::new(schema()).unwrap();
        let k1 = wh
            .upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "II"), date("2010-01-01"))
            .unwrap();
        let before = wh.dimension_rows("DimPatient").unwrap().len();
        let k2 = wh
            .upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "II"), date("2010-01-01"))
            .unwrap();
        assert_eq!(k1, k2);
        assert_eq!(wh.dimension_rows("DimPatient").unwrap().len(), before);
        // identical attributes under a different effective date: still a no-op
        let k3 = wh
            .upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "II"), date("2012-01-01"))
            .unwrap();
        assert_eq!(k1, k3);
    }

    #[test]
    fn historical_version_reapplication_is_idempotent() {
        let mut wh = Warehouse::new(schema()).unwrap();
        let k1 = wh
            .upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "II"), date("2010-01-01"))
            .unwrap();
        wh.upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "III"), date("2011-06-01"))
            .unwrap();
        let again = wh
            .upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "II"), date("2010-01-01"))
            .unwrap();
        assert_eq!(k1, again);
        assert_eq!(wh.dimension_rows("DimPatient").unwrap().len(), 2);
    }

    #[test]
    fn non_scd2_change_is_rejected() {
        let mut wh = Warehouse::new(schema()).unwrap();
        let attrs = |name: &str| -> BTreeMap<String, Value> {
            [
                ("cancerCode", Value::Text("C91".into())),
                ("cancerName", Value::Text(name.into())),
                ("organ", Value::Text("Blood".into())),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
        };
        wh.upsert_dimension_row("DimCancerType", "C91", attrs("Leukemia"), date("1900-01-01"))
            .unwrap();
        let err = wh
            .upsert_dimension_row("DimCancerType", "C91", attrs("Renamed"), date("2011-01-01"))
            .unwrap_err();
        assert!(matches!(err, StoreError::NonScd2Change { .. }));
    }

    #[test]
    fn effective_regression_is_rejected() {
        let mut wh = Warehouse::new(schema()).unwrap();
        wh.upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "II"), date("2010-06-01"))
            .unwrap();
        let err = wh
            .upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "III"), date("2010-01-01"))
            .unwrap_err();
        assert!(matches!(err, StoreError::EffectivePrecedesOpen { .. }));
        let err = wh
            .upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "III"), date("2010-06-01"))
            .unwrap_err();
        assert!(matches!(err, StoreError::SameDayChange { .. }));
    }

    #[test]
    fn attribute_kind_mismatch_is_rejected() {
        let mut wh = Warehouse::new(schema()).unwrap();
        let mut attrs = patient_attrs("P001", "II");
        attrs.insert("birthDate".into(), Value::Text("1960-04-12".into()));
        let err = wh
            .upsert_dimension_row("DimPatient", "P001", attrs, date("2010-01-01"))
            .unwrap_err();
        assert!(matches!(err, StoreError::KindMismatch { .. }));
    }

    #[test]
    fn crossref_resolution() {
        let wh = Warehouse::new(schema()).unwrap();
        assert_eq!(wh.resolve_crossref("DimCancerType", "Leukaemia").unwrap(), "C91");
        assert_eq!(wh.resolve_crossref("DimCancerType", "C91").unwrap(), "C91");
        assert_eq!(wh.resolve_crossref("DimCancerType", "").unwrap(), "");
        assert!(matches!(
            wh.resolve_crossref("DimDrug", "x"),
            Err(StoreError::UnknownDimension(_))
        ));
    }

    #[test]
    fn point_in_time_respects_half_open_boundaries() {
        let mut wh = Warehouse::new(schema()).unwrap();
        wh.upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "II"), date("2010-01-01"))
            .unwrap();
        wh.upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "III"), date("2011-06-01"))
            .unwrap();
        let stage_at = |at: &str| {
            wh.point_in_time("DimPatient", "P001", date(at))
                .unwrap()
                .map(|r| r.attributes["stage"].render())
        };
        assert_eq!(stage_at("2010-07-01"), Some("II".into()));
        assert_eq!(stage_at("2011-06-01"), Some("III".into())); // boundary goes to successor
        assert_eq!(stage_at("2011-05-31"), Some("II".into()));
        assert_eq!(stage_at("2009-01-01"), None);
    }

    fn loaded_warehouse() -> Warehouse {
        let mut wh = Warehouse::new(schema()).unwrap();
        wh.upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "II"), date("2010-01-01"))
            .unwrap();
        for (code, name, organ) in [("C91", "Leukemia", "Blood"), ("C81", "Lymphoma", "Blood")] {
            let attrs: BTreeMap<String, Value> = [
                ("cancerCode", Value::Text(code.into())),
                ("cancerName", Value::Text(name.into())),
                ("organ", Value::Text(organ.into())),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            wh.upsert_dimension_row("DimCancerType", code, attrs, date("1900-01-01")).unwrap();
        }
        let proc_attrs: BTreeMap<String, Value> = [
            ("procCode", Value::Text("PR01".into())),
            ("procName", Value::Text("Chemotherapy".into())),
            ("kind", Value::Text("Drug".into())),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        wh.upsert_dimension_row("DimProcedure", "PR01", proc_attrs, date("1900-01-01")).unwrap();
        let d = Date::new(2011, 6, 1).unwrap();
        let date_attrs: BTreeMap<String, Value> = [
            ("dateKey", Value::Integer(d.yyyymmdd() as i64)),
            ("day", Value::Integer(d.day() as i64)),
            ("month", Value::Integer(d.month() as i64)),
            ("quarter", Value::Integer(d.quarter() as i64)),
            ("year", Value::Integer(d.year() as i64)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        wh.upsert_dimension_row("DimDate", "20110601", date_attrs, date("1900-01-01")).unwrap();
        wh
    }

    fn naturals(cancer: &str) -> BTreeMap<String, String> {
        [
            ("DimPatient", "P001"),
            ("DimCancerType", cancer),
            ("DimProcedure", "PR01"),
            ("DimDate", "20110601"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
    }

    fn measures(cost: f64) -> BTreeMap<String, f64> {
        [("cost", cost), ("deaths", 0.0), ("patients", 1.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    #[test]
    fn append_fact_stores_and_counts() {
        let mut wh = loaded_warehouse();
        assert_eq!(wh.fact_count(), 0);
        let row = wh.append_fact(&naturals("C91"), &measures(1500.0), date("2011-06-01")).unwrap();
        assert_eq!(wh.fact_count(), 1);
        assert_eq!(row.measures["cost"], 1500.0);
        assert_eq!(row.dim_keys["DimPatient"].value(), 1);
    }

    #[test]
    fn append_fact_errors_name_key_and_date() {
        let mut wh = loaded_warehouse();
        let err = wh
            .append_fact(&naturals("C99"), &measures(10.0), date("2011-06-01"))
            .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("C99") && text.contains("2011-06-01"), "{text}");

        let err = wh
            .append_fact(&naturals("C91"), &measures(f64::NAN), date("2011-06-01"))
            .unwrap_err();
        assert!(matches!(err, StoreError::NonFiniteMeasure(_)));

        let mut m = measures(10.0);
        m.insert("deathRate".into(), 0.5);
        let err = wh.append_fact(&naturals("C91"), &m, date("2011-06-01")).unwrap_err();
        assert!(matches!(err, StoreError::DerivedMeasure(_)));

        let mut m = measures(10.0);
        m.remove("deaths");
        let err = wh.append_fact(&naturals("C91"), &m, date("2011-06-01")).unwrap_err();
        assert!(matches!(err, StoreError::MissingMeasure(_)));
    }

    #[test]
    fn facts_resolve_keys_valid_at_as_of() {
        let mut wh = loaded_warehouse();
        wh.upsert_dimension_row("DimPatient", "P001", patient_attrs("P001", "III"), date("2011-06-02"))
            .unwrap();
        let early = wh.append_fact(&naturals("C91"), &measures(1.0), date("2011-06-01")).unwrap();
        let late = wh.append_fact(&naturals("C91"), &measures(2.0), date("2011-06-02")).unwrap();
        assert_eq!(early.dim_keys["DimPatient"].value(), 1);
        assert_eq!(late.dim_keys["DimPatient"].value(), 2);
    }

    #[test]
    fn mutation_guard_hook_permits_overwrites() {
        let mut wh = loaded_warehouse();
        wh.testing_set_mutation_guard(false);
        let attrs: BTreeMap<String, Value> = [
            ("cancerCode", Value::Text("C91".into())),
            ("cancerName", Value::Text("Renamed".into())),
            ("organ", Value::Text("Blood".into())),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        // silently overwrites instead of erroring: the A4 probe must notice
        wh.upsert_dimension_row("DimCancerType", "C91", attrs, date("2012-01-01")).unwrap();
        let row = wh.current_row("DimCancerType", "C91").unwrap().unwrap();
        assert_eq!(row.attributes["cancerName"].render(), "Renamed");
    }
}
