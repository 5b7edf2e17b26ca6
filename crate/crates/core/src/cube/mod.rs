//! OLAP aggregation over the fact table.
//!
//! A [`CubeEngine`] borrows a warehouse snapshot and serves aggregation
//! views: axes of dimension members at a chosen hierarchy level, slicers
//! pinning other levels to single members, and measure evaluation with
//! aggregate-then-divide semantics for ratios. Group-bys are computed lazily
//! on first use and memoized per (axes, slicers, as-of) key, so repeated
//! queries are served from the memo; nothing is materialized eagerly.
//!
//! Dimension members are resolved through the natural key: with `as_of`, the
//! row valid at that date; otherwise the current row. Facts therefore follow
//! attribute history (a patient's facts roll under the stage valid at the
//! chosen date).

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::date::Date;
use crate::store::{StoreError, Warehouse};
use crate::value::member_sort;

#[derive(Debug, Error)]
pub enum CubeError {
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("dimension {dim:?} has no level {level:?}")]
    UnknownLevel { dim: String, level: String },
    #[error("no member {member:?} at {dim:?}.{level:?}")]
    UnknownMember { dim: String, level: String, member: String },
    #[error("unknown measure {0:?}")]
    UnknownMeasure(String),
    #[error("level {level:?} is not in the hierarchy of {dim:?}")]
    NotInHierarchy { dim: String, level: String },
    #[error("axis {dim:?}.{level:?} is already at the finest level")]
    AtFinestLevel { dim: String, level: String },
    #[error("axis {dim:?}.{level:?} is already at the coarsest level")]
    AtCoarsestLevel { dim: String, level: String },
    #[error("axis index {0} out of range")]
    AxisIndexOutOfRange(usize),
    #[error("member {0:?} is not on the axis")]
    MemberNotOnAxis(String),
    #[error("no {dim:?} row for natural key {natural_key:?} covers {at}")]
    NoCoveringRow { dim: String, natural_key: String, at: Date },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// One axis of a cube view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeAxis {
    pub dimension: String,
    pub level: String,
    /// Distinct member values appearing in the result, sorted by the level's
    /// value kind.
    pub members: Vec<String>,
}

/// A slicer pins one hierarchy level to a single member.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Slicer {
    pub dimension: String,
    pub level: String,
    pub member: String,
}

/// An immutable aggregation view. Coordinates are per-axis member tuples;
/// only coordinates with matching facts are present. Ratio measures are
/// absent where their denominator aggregates to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeResult {
    pub axes: Vec<CubeAxis>,
    pub cells: BTreeMap<Vec<String>, BTreeMap<String, f64>>,
    pub as_of: Option<Date>,
    pub slicers: Vec<Slicer>,
    pub measures: Vec<String>,
}

impl CubeResult {
    pub fn cell(&self, coordinate: &[String], measure: &str) -> Option<f64> {
        self.cells.get(coordinate).and_then(|m| m.get(measure)).copied()
    }
}

type MemoKey = (Vec<(String, String)>, Vec<Slicer>, Option<Date>);
/// coordinate (as member-id tuple) -> base measure sums + fact count
type GroupedBase = HashMap<Vec<u32>, Group>;

#[derive(Clone, Debug, Default)]
struct Group {
    sums: Vec<f64>,
    count: u64,
}

struct Grouped {
    /// Per-axis member value tables; coordinates index into these.
    member_tables: Vec<Vec<String>>,
    groups: GroupedBase,
}

/// Read-only aggregation engine over a warehouse snapshot. The memo is
/// internally synchronized; `&CubeEngine` is enough to aggregate, and
/// results are immutable.
pub struct CubeEngine<'w> {
    wh: &'w Warehouse,
    memo: Mutex<HashMap<MemoKey, Arc<Grouped>>>,
}

impl<'w> CubeEngine<'w> {
    pub fn new(wh: &'w Warehouse) -> Self {
        CubeEngine { wh, memo: Mutex::new(HashMap::new()) }
    }

    pub fn warehouse(&self) -> &'w Warehouse {
        self.wh
    }

    /// Aggregate the requested measures over the axes' member cross-product,
    /// restricted by slicers, resolving members at `as_of` when given.
    pub fn aggregate(
        &self,
        axes: &[(&str, &str)],
        slicers: &[(&str, &str, &str)],
        measures: &[&str],
        as_of: Option<Date>,
    ) -> Result<CubeResult, CubeError> {
        let schema = self.wh.schema();
        for (dim, level) in axes {
            let def = schema
                .dimension(dim)
                .ok_or_else(|| CubeError::UnknownDimension(dim.to_string()))?;
            if def.attribute(level).is_none() {
                return Err(CubeError::UnknownLevel {
                    dim: dim.to_string(),
                    level: level.to_string(),
                });
            }
        }
        for measure in measures {
            if schema.fact.measure(measure).is_none() {
                return Err(CubeError::UnknownMeasure(measure.to_string()));
            }
        }
        let slicers: Vec<Slicer> = slicers
            .iter()
            .map(|(d, l, m)| self.validate_slicer(d, l, m, as_of))
            .collect::<Result<_, _>>()?;

        let key: MemoKey = (
            axes.iter().map(|(d, l)| (d.to_string(), l.to_string())).collect(),
            slicers.clone(),
            as_of,
        );
        let grouped = self.grouped(&key, as_of)?;

        let mut cells: BTreeMap<Vec<String>, BTreeMap<String, f64>> = BTreeMap::new();
        for (coord_ids, group) in &grouped.groups {
            let coordinate: Vec<String> = coord_ids
                .iter()
                .zip(&grouped.member_tables)
                .map(|(&id, table)| table[id as usize].clone())
                .collect();
            let mut cell = BTreeMap::new();
            for measure in measures {
                if let Some(v) = self.evaluate_measure(measure, group) {
                    cell.insert(measure.to_string(), v);
                }
            }
            cells.insert(coordinate, cell);
        }

        let mut result_axes = Vec::with_capacity(axes.len());
        for (pos, (dim, level)) in axes.iter().enumerate() {
            let def = schema.dimension(dim).expect("validated above");
            let kind = def.attribute(level).expect("validated above").kind;
            let mut members: Vec<String> = cells
                .keys()
                .map(|c| c[pos].clone())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            member_sort(&mut members, kind);
            result_axes.push(CubeAxis {
                dimension: dim.to_string(),
                level: level.to_string(),
                members,
            });
        }

        Ok(CubeResult {
            axes: result_axes,
            cells,
            as_of,
            slicers,
            measures: measures.iter().map(|m| m.to_string()).collect(),
        })
    }

    /// Re-aggregate one axis at the next finer hierarchy level, restricted to
    /// the `within` member of the current level. Sum/count cells of the
    /// children total the parent cell.
    pub fn drill_down(
        &self,
        result: &CubeResult,
        axis_index: usize,
        within: &str,
    ) -> Result<CubeResult, CubeError> {
        let axis = result
            .axes
            .get(axis_index)
            .ok_or(CubeError::AxisIndexOutOfRange(axis_index))?;
        if !axis.members.iter().any(|m| m == within) {
            return Err(CubeError::MemberNotOnAxis(within.to_string()));
        }
        let def = self
            .wh
            .schema()
            .dimension(&axis.dimension)
            .ok_or_else(|| CubeError::UnknownDimension(axis.dimension.clone()))?;
        if !def.hierarchy.contains(&axis.level) {
            return Err(CubeError::NotInHierarchy {
                dim: axis.dimension.clone(),
                level: axis.level.clone(),
            });
        }
        let finer = def.finer_level(&axis.level).ok_or_else(|| CubeError::AtFinestLevel {
            dim: axis.dimension.clone(),
            level: axis.level.clone(),
        })?;

        let axes: Vec<(String, String)> = result
            .axes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let level = if i == axis_index { finer.to_string() } else { a.level.clone() };
                (a.dimension.clone(), level)
            })
            .collect();
        let mut slicers: Vec<(String, String, String)> = result
            .slicers
            .iter()
            .map(|s| (s.dimension.clone(), s.level.clone(), s.member.clone()))
            .collect();
        slicers.push((axis.dimension.clone(), axis.level.clone(), within.to_string()));
        self.re_aggregate(result, axes, slicers)
    }

    /// Re-aggregate one axis at the next coarser hierarchy level.
    pub fn roll_up(&self, result: &CubeResult, axis_index: usize) -> Result<CubeResult, CubeError> {
        let axis = result
            .axes
            .get(axis_index)
            .ok_or(CubeError::AxisIndexOutOfRange(axis_index))?;
        let def = self
            .wh
            .schema()
            .dimension(&axis.dimension)
            .ok_or_else(|| CubeError::UnknownDimension(axis.dimension.clone()))?;
        if !def.hierarchy.contains(&axis.level) {
            return Err(CubeError::NotInHierarchy {
                dim: axis.dimension.clone(),
                level: axis.level.clone(),
            });
        }
        let coarser = def.coarser_level(&axis.level).ok_or_else(|| CubeError::AtCoarsestLevel {
            dim: axis.dimension.clone(),
            level: axis.level.clone(),
        })?;
        let axes: Vec<(String, String)> = result
            .axes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let level = if i == axis_index { coarser.to_string() } else { a.level.clone() };
                (a.dimension.clone(), level)
            })
            .collect();
        let slicers: Vec<(String, String, String)> = result
            .slicers
            .iter()
            .map(|s| (s.dimension.clone(), s.level.clone(), s.member.clone()))
            .collect();
        self.re_aggregate(result, axes, slicers)
    }

    fn re_aggregate(
        &self,
        result: &CubeResult,
        axes: Vec<(String, String)>,
        slicers: Vec<(String, String, String)>,
    ) -> Result<CubeResult, CubeError> {
        let axes_ref: Vec<(&str, &str)> = axes.iter().map(|(d, l)| (d.as_str(), l.as_str())).collect();
        let slicers_ref: Vec<(&str, &str, &str)> = slicers
            .iter()
            .map(|(d, l, m)| (d.as_str(), l.as_str(), m.as_str()))
            .collect();
        let measures_ref: Vec<&str> = result.measures.iter().map(String::as_str).collect();
        self.aggregate(&axes_ref, &slicers_ref, &measures_ref, result.as_of)
    }

    fn evaluate_measure(&self, name: &str, group: &Group) -> Option<f64> {
        use crate::schema::MeasureKind::*;
        let fact = &self.wh.schema().fact;
        let base_pos = |n: &str| fact.base_measures().position(|m| m.name == n);
        match &fact.measure(name)?.kind {
            Sum | Count => Some(group.sums[base_pos(name)?]),
            Average { base } => {
                let sum = group.sums[base_pos(base)?];
                (group.count > 0).then(|| sum / group.count as f64)
            }
            Ratio { numerator, denominator } => {
                let num = group.sums[base_pos(numerator)?];
                let den = group.sums[base_pos(denominator)?];
                (den != 0.0).then(|| num / den)
            }
        }
    }

    fn validate_slicer(
        &self,
        dim: &str,
        level: &str,
        member: &str,
        as_of: Option<Date>,
    ) -> Result<Slicer, CubeError> {
        let def = self
            .wh
            .schema()
            .dimension(dim)
            .ok_or_else(|| CubeError::UnknownDimension(dim.to_string()))?;
        if def.attribute(level).is_none() {
            return Err(CubeError::UnknownLevel { dim: dim.to_string(), level: level.to_string() });
        }
        let mut found = false;
        for natural in self.wh.natural_keys(dim)? {
            let row = match as_of {
                Some(at) => self.wh.point_in_time(dim, natural, at)?,
                None => self.wh.current_row(dim, natural)?,
            };
            if let Some(row) = row {
                if row.attributes[level].render() == member {
                    found = true;
                    break;
                }
            }
        }
        if !found {
            return Err(CubeError::UnknownMember {
                dim: dim.to_string(),
                level: level.to_string(),
                member: member.to_string(),
            });
        }
        Ok(Slicer {
            dimension: dim.to_string(),
            level: level.to_string(),
            member: member.to_string(),
        })
    }

    fn grouped(&self, key: &MemoKey, as_of: Option<Date>) -> Result<Arc<Grouped>, CubeError> {
        if let Some(hit) = self.memo.lock().expect("memo lock").get(key) {
            return Ok(hit.clone());
        }
        let computed = Arc::new(self.compute_grouped(key, as_of)?);
        self.memo
            .lock()
            .expect("memo lock")
            .insert(key.clone(), computed.clone());
        Ok(computed)
    }

    /// One columnar scan of the fact table, grouping member-id tuples.
    fn compute_grouped(&self, key: &MemoKey, as_of: Option<Date>) -> Result<Grouped, CubeError> {
        let (axes, slicers, _) = key;
        let mut axis_luts = Vec::with_capacity(axes.len());
        let mut member_tables = Vec::with_capacity(axes.len());
        for (dim, level) in axes {
            let (lut, table) = self.member_lut(dim, level, as_of)?;
            axis_luts.push((self.wh.fact_dim_column(dim)?, lut));
            member_tables.push(table);
        }
        let mut slicer_luts = Vec::with_capacity(slicers.len());
        for s in slicers {
            let (lut, table) = self.member_lut(&s.dimension, &s.level, as_of)?;
            let wanted: Option<u32> = table
                .iter()
                .position(|v| v == &s.member)
                .map(|i| i as u32);
            slicer_luts.push((
                self.wh.fact_dim_column(&s.dimension)?,
                lut,
                wanted,
                s.dimension.clone(),
            ));
        }

        let base_count = self.wh.schema().fact.base_measures().count();
        let mut measure_cols = Vec::with_capacity(base_count);
        for m in self.wh.schema().fact.base_measures() {
            measure_cols.push(self.wh.fact_measure_column(&m.name)?);
        }

        let mut groups: GroupedBase = HashMap::new();
        let mut coordinate = vec![0u32; axes.len()];
        'facts: for i in 0..self.wh.fact_count() {
            for (col, lut, wanted, dim) in &slicer_luts {
                let key_val = col[i];
                let member_id = lut[(key_val - 1) as usize];
                match (member_id, wanted) {
                    (Some(id), Some(w)) if id == *w => {}
                    (Some(_), _) => continue 'facts,
                    (None, _) => return Err(self.no_covering_row(dim, key_val, as_of)),
                }
            }
            for (pos, (col, lut)) in axis_luts.iter().enumerate() {
                let key_val = col[i];
                match lut[(key_val - 1) as usize] {
                    Some(id) => coordinate[pos] = id,
                    None => {
                        let dim = &axes[pos].0;
                        return Err(self.no_covering_row(dim, key_val, as_of));
                    }
                }
            }
            let group = groups.entry(coordinate.clone()).or_insert_with(|| Group {
                sums: vec![0.0; base_count],
                count: 0,
            });
            for (pos, col) in measure_cols.iter().enumerate() {
                group.sums[pos] += col[i];
            }
            group.count += 1;
        }
        Ok(Grouped { member_tables, groups })
    }

    /// Per-surrogate-key member lookup: key -> member id at (dim, level),
    /// resolved through the natural key at `as_of` (or the current row).
    /// Returns the lut and the member-id value table.
    fn member_lut(
        &self,
        dim: &str,
        level: &str,
        as_of: Option<Date>,
    ) -> Result<(Vec<Option<u32>>, Vec<String>), CubeError> {
        let rows = self.wh.dimension_rows(dim)?;
        let mut table: Vec<String> = Vec::new();
        let mut ids: HashMap<String, u32> = HashMap::new();
        // resolved member per natural key
        let mut by_natural: HashMap<&str, Option<u32>> = HashMap::new();
        for row in rows {
            by_natural.entry(&row.natural_key).or_insert_with(|| {
                let resolved = match as_of {
                    Some(at) => self
                        .wh
                        .point_in_time(dim, &row.natural_key, at)
                        .expect("dimension exists"),
                    None => self.wh.current_row(dim, &row.natural_key).expect("dimension exists"),
                };
                resolved.map(|r| {
                    let value = r.attributes[level].render();
                    *ids.entry(value.clone()).or_insert_with(|| {
                        table.push(value);
                        (table.len() - 1) as u32
                    })
                })
            });
        }
        let lut: Vec<Option<u32>> = rows
            .iter()
            .map(|row| by_natural[row.natural_key.as_str()])
            .collect();
        Ok((lut, table))
    }

    fn no_covering_row(&self, dim: &str, key: u64, as_of: Option<Date>) -> CubeError {
        let natural = self
            .wh
            .dimension_row_by_key(dim, key)
            .ok()
            .flatten()
            .map(|r| r.natural_key.clone())
            .unwrap_or_default();
        CubeError::NoCoveringRow {
            dim: dim.to_string(),
            natural_key: natural,
            at: as_of.expect("missing rows only arise under as_of resolution"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_schema;
    use crate::value::Value;
    use std::collections::BTreeMap;

    // A small warehouse with three facts mirroring the canonical example:
    // (Leukemia, 100), (Leukemia, 250), (Lymphoma, 40).
    fn three_fact_warehouse() -> Warehouse {
        let schema = parse_schema(crate::reference_schema_text()).unwrap();
        let mut wh = Warehouse::new(schema).unwrap();
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
        let patient: BTreeMap<String, Value> = [
            ("patientNo", Value::Text("P001".into())),
            ("name", Value::Text("Alex Doe".into())),
            ("sex", Value::Text("F".into())),
            ("birthDate", Value::Date(date("1960-04-12"))),
            ("stage", Value::Text("II".into())),
            ("phase", Value::Text("Treatment".into())),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        wh.upsert_dimension_row("DimPatient", "P001", patient, date("2009-01-01")).unwrap();
        let proc: BTreeMap<String, Value> = [
            ("procCode", Value::Text("PR01".into())),
            ("procName", Value::Text("Chemotherapy".into())),
            ("kind", Value::Text("Drug".into())),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        wh.upsert_dimension_row("DimProcedure", "PR01", proc, date("1900-01-01")).unwrap();
        for day in ["2011-02-10", "2011-06-01", "2011-09-15"] {
            let d = date(day);
            let attrs: BTreeMap<String, Value> = [
                ("dateKey", Value::Integer(d.yyyymmdd() as i64)),
                ("day", Value::Integer(d.day() as i64)),
                ("month", Value::Integer(d.month() as i64)),
                ("quarter", Value::Integer(d.quarter() as i64)),
                ("year", Value::Integer(d.year() as i64)),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            wh.upsert_dimension_row("DimDate", &d.yyyymmdd().to_string(), attrs, date("1900-01-01"))
                .unwrap();
        }
        for (cancer, day, cost, deaths) in [
            ("C91", "2011-02-10", 100.0, 0.0),
            ("C91", "2011-06-01", 250.0, 2.0),
            ("C81", "2011-09-15", 40.0, 0.0),
        ] {
            let naturals: BTreeMap<String, String> = [
                ("DimPatient", "P001".to_string()),
                ("DimCancerType", cancer.to_string()),
                ("DimProcedure", "PR01".to_string()),
                ("DimDate", date(day).yyyymmdd().to_string()),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            let measures: BTreeMap<String, f64> =
                [("cost", cost), ("deaths", deaths), ("patients", 1.0)]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect();
            wh.append_fact(&naturals, &measures, date(day)).unwrap();
        }
        wh
    }

    fn date(s: &str) -> Date {
        Date::parse_iso(s).unwrap()
    }

    #[test]
    fn empty_fact_table_yields_declared_axes_and_no_cells() {
        let schema = parse_schema(crate::reference_schema_text()).unwrap();
        let wh = Warehouse::new(schema).unwrap();
        let engine = CubeEngine::new(&wh);
        let result = engine
            .aggregate(&[("DimCancerType", "cancerName")], &[], &["cost"], None)
            .unwrap();
        assert_eq!(result.axes.len(), 1);
        assert!(result.axes[0].members.is_empty());
        assert!(result.cells.is_empty());
    }

    #[test]
    fn sums_group_by_axis_members() {
        let wh = three_fact_warehouse();
        let engine = CubeEngine::new(&wh);
        let result = engine
            .aggregate(&[("DimCancerType", "cancerName")], &[], &["cost"], None)
            .unwrap();
        assert_eq!(result.cell(&["Leukemia".to_string()], "cost"), Some(350.0));
        assert_eq!(result.cell(&["Lymphoma".to_string()], "cost"), Some(40.0));
        assert_eq!(result.axes[0].members, vec!["Leukemia", "Lymphoma"]);
    }

    #[test]
    fn ratio_is_aggregate_then_divide() {
        let wh = three_fact_warehouse();
        let engine = CubeEngine::new(&wh);
        let result = engine
            .aggregate(&[("DimCancerType", "cancerName")], &[], &["deathRate"], None)
            .unwrap();
        // Leukemia: deaths 2 over patients 2 -> 1.0; two facts of 1 patient each
        assert_eq!(result.cell(&["Leukemia".to_string()], "deathRate"), Some(1.0));
        assert_eq!(result.cell(&["Lymphoma".to_string()], "deathRate"), Some(0.0));
    }

    #[test]
    fn zero_denominator_leaves_cell_absent() {
        let schema = parse_schema(
            "dimension D\n  attr k:text\n  attr g:text\n  key k\n\
             fact F\n  dim D\n  measure num:sum\n  measure den:sum\n  measure r:ratio(num,den)\n",
        )
        .unwrap();
        let mut wh = Warehouse::new(schema).unwrap();
        for (k, g) in [("a", "left"), ("b", "right")] {
            let attrs: BTreeMap<String, Value> = [
                ("k".to_string(), Value::Text(k.into())),
                ("g".to_string(), Value::Text(g.into())),
            ]
            .into_iter()
            .collect();
            wh.upsert_dimension_row("D", k, attrs, date("2000-01-01")).unwrap();
        }
        for (k, num, den) in [("a", 3.0, 0.0), ("b", 5.0, 2.0)] {
            let naturals: BTreeMap<String, String> = [("D".to_string(), k.to_string())].into_iter().collect();
            let measures: BTreeMap<String, f64> =
                [("num".to_string(), num), ("den".to_string(), den)].into_iter().collect();
            wh.append_fact(&naturals, &measures, date("2000-06-01")).unwrap();
        }
        let engine = CubeEngine::new(&wh);
        let result = engine.aggregate(&[("D", "g")], &[], &["r", "num"], None).unwrap();
        // the "left" coordinate exists (it has a fact) but its ratio is absent
        assert_eq!(result.cell(&["left".to_string()], "num"), Some(3.0));
        assert_eq!(result.cell(&["left".to_string()], "r"), None);
        assert_eq!(result.cell(&["right".to_string()], "r"), Some(2.5));
    }

    #[test]
    fn slicers_restrict_facts() {
        let wh = three_fact_warehouse();
        let engine = CubeEngine::new(&wh);
        let result = engine
            .aggregate(
                &[("DimCancerType", "cancerName")],
                &[("DimDate", "year", "2011"), ("DimDate", "quarter", "1")],
                &["cost"],
                None,
            )
            .unwrap();
        assert_eq!(result.cell(&["Leukemia".to_string()], "cost"), Some(100.0));
        assert_eq!(result.cell(&["Lymphoma".to_string()], "cost"), None);
    }

    #[test]
    fn unknown_names_are_errors() {
        let wh = three_fact_warehouse();
        let engine = CubeEngine::new(&wh);
        assert!(matches!(
            engine.aggregate(&[("DimDrug", "x")], &[], &["cost"], None),
            Err(CubeError::UnknownDimension(_))
        ));
        assert!(matches!(
            engine.aggregate(&[("DimDate", "epoch")], &[], &["cost"], None),
            Err(CubeError::UnknownLevel { .. })
        ));
        assert!(matches!(
            engine.aggregate(&[("DimDate", "year")], &[], &["profit"], None),
            Err(CubeError::UnknownMeasure(_))
        ));
        assert!(matches!(
            engine.aggregate(&[("DimDate", "year")], &[("DimDate", "year", "1999")], &["cost"], None),
            Err(CubeError::UnknownMember { .. })
        ));
    }

    #[test]
    fn drill_down_conserves_sums_and_rolls_back_up() {
        let wh = three_fact_warehouse();
        let engine = CubeEngine::new(&wh);
        let year = engine
            .aggregate(&[("DimDate", "year")], &[], &["cost"], None)
            .unwrap();
        assert_eq!(year.cell(&["2011".to_string()], "cost"), Some(390.0));

        let quarters = engine.drill_down(&year, 0, "2011").unwrap();
        let total: f64 = quarters
            .axes[0]
            .members
            .iter()
            .filter_map(|q| quarters.cell(&[q.clone()], "cost"))
            .sum();
        assert_eq!(total, 390.0);
        assert_eq!(quarters.axes[0].members, vec!["1", "2", "3"]);

        let back = engine.roll_up(&quarters, 0).unwrap();
        assert_eq!(back.cell(&["2011".to_string()], "cost"), Some(390.0));
    }

    #[test]
    fn drill_below_finest_level_fails() {
        let wh = three_fact_warehouse();
        let engine = CubeEngine::new(&wh);
        let day = engine
            .aggregate(&[("DimDate", "day")], &[], &["cost"], None)
            .unwrap();
        assert!(matches!(
            engine.drill_down(&day, 0, "1"),
            Err(CubeError::AtFinestLevel { .. })
        ));
        let year = engine
            .aggregate(&[("DimDate", "year")], &[], &["cost"], None)
            .unwrap();
        assert!(matches!(
            engine.roll_up(&year, 0),
            Err(CubeError::AtCoarsestLevel { .. })
        ));
        assert!(matches!(
            engine.drill_down(&year, 0, "2025"),
            Err(CubeError::MemberNotOnAxis(_))
        ));
        // drill requires a declared hierarchy
        let names = engine
            .aggregate(&[("DimCancerType", "cancerName")], &[], &["cost"], None)
            .unwrap();
        assert!(matches!(
            engine.drill_down(&names, 0, "Leukemia"),
            Err(CubeError::NotInHierarchy { .. })
        ));
    }

    #[test]
    fn drill_within_single_child_equals_parent() {
        let wh = three_fact_warehouse();
        let engine = CubeEngine::new(&wh);
        let quarters = engine
            .aggregate(&[("DimDate", "quarter")], &[], &["cost"], None)
            .unwrap();
        // quarter 3 has one month only
        let months = engine.drill_down(&quarters, 0, "3").unwrap();
        assert_eq!(months.axes[0].members, vec!["9"]);
        assert_eq!(
            months.cell(&["9".to_string()], "cost"),
            quarters.cell(&["3".to_string()], "cost")
        );
    }

    #[test]
    fn as_of_resolves_members_through_history() {
        let mut wh = three_fact_warehouse();
        // patient moves to stage III mid-2011; facts follow the stage valid
        // at the chosen date
        let mut attrs: BTreeMap<String, Value> = wh
            .current_row("DimPatient", "P001")
            .unwrap()
            .unwrap()
            .attributes
            .clone();
        attrs.insert("stage".into(), Value::Text("III".into()));
        wh.upsert_dimension_row("DimPatient", "P001", attrs, date("2011-07-01")).unwrap();

        let engine = CubeEngine::new(&wh);
        let current = engine
            .aggregate(&[("DimPatient", "stage")], &[], &["cost"], None)
            .unwrap();
        assert_eq!(current.cell(&["III".to_string()], "cost"), Some(390.0));

        let historical = engine
            .aggregate(&[("DimPatient", "stage")], &[], &["cost"], Some(date("2011-01-01")))
            .unwrap();
        assert_eq!(historical.cell(&["II".to_string()], "cost"), Some(390.0));

        // any as_of before the patient existed cannot cover the facts
        assert!(matches!(
            engine.aggregate(&[("DimPatient", "stage")], &[], &["cost"], Some(date("2008-01-01"))),
            Err(CubeError::NoCoveringRow { .. })
        ));
    }

    #[test]
    fn memo_reuses_group_bys() {
        let wh = three_fact_warehouse();
        let engine = CubeEngine::new(&wh);
        let a = engine
            .aggregate(&[("DimCancerType", "cancerName")], &[], &["cost"], None)
            .unwrap();
        let b = engine
            .aggregate(&[("DimCancerType", "cancerName")], &[], &["cost", "deaths"], None)
            .unwrap();
        assert_eq!(a.cell(&["Leukemia".to_string()], "cost"), b.cell(&["Leukemia".to_string()], "cost"));
        assert_eq!(engine.memo.lock().unwrap().len(), 1); // same group-by key
    }
}
