//! Bind and execute parsed queries against the cube.
//!
//! Axis sets are expanded against current dimension rows, the implied
//! aggregation runs once, and the grid is filled from the result cells.
//! Coordinates with no facts stay empty.

use crate::cube::{CubeEngine, CubeError};
use crate::store::Warehouse;
use crate::value::member_sort;

use super::{MdxError, MdxQuery, MemberPath, ResultGrid, SetExpr, SlicerExpr};

pub fn execute_mdx(q: &MdxQuery, wh: &Warehouse) -> Result<ResultGrid, MdxError> {
    let engine = CubeEngine::new(wh);
    execute_with_engine(q, &engine)
}

/// Execute against a caller-owned engine so repeated queries share its memo.
pub fn execute_with_engine(q: &MdxQuery, engine: &CubeEngine<'_>) -> Result<ResultGrid, MdxError> {
    let bound = bind_query(q, engine.warehouse())?;

    // dimension axes in (rows, columns) order fix the coordinate layout
    let mut dim_axes: Vec<(&str, &str, &[String])> = Vec::new();
    let mut row_axis_pos = None;
    let mut col_axis_pos = None;
    if let Some(BoundAxis::Dim { dimension, level, members }) = &bound.rows {
        row_axis_pos = Some(dim_axes.len());
        dim_axes.push((dimension, level, members));
    }
    if let BoundAxis::Dim { dimension, level, members } = &bound.columns {
        col_axis_pos = Some(dim_axes.len());
        dim_axes.push((dimension, level, members));
    }

    let axes: Vec<(&str, &str)> = dim_axes.iter().map(|(d, l, _)| (*d, *l)).collect();
    let slicers: Vec<(&str, &str, &str)> = bound
        .slicer_members
        .iter()
        .map(|(d, l, m)| (d.as_str(), l.as_str(), m.as_str()))
        .collect();
    let measure_refs: Vec<&str> = bound.measures.iter().map(String::as_str).collect();
    let result = engine.aggregate(&axes, &slicers, &measure_refs, None)?;

    let column_headers: Vec<String> = match &bound.columns {
        BoundAxis::Measures(names) => names.clone(),
        BoundAxis::Dim { members, .. } => members.clone(),
    };
    let row_headers: Vec<String> = match &bound.rows {
        None => vec![String::new()],
        Some(BoundAxis::Measures(names)) => names.clone(),
        Some(BoundAxis::Dim { members, .. }) => members.clone(),
    };

    let mut cells = Vec::with_capacity(row_headers.len());
    let mut coordinate: Vec<String> = vec![String::new(); dim_axes.len()];
    for (r, row_header) in row_headers.iter().enumerate() {
        let mut row_cells = Vec::with_capacity(column_headers.len());
        for (c, col_header) in column_headers.iter().enumerate() {
            if let Some(pos) = row_axis_pos {
                coordinate[pos] = row_header.clone();
            }
            if let Some(pos) = col_axis_pos {
                coordinate[pos] = col_header.clone();
            }
            let measure = bound.cell_measure(r, c);
            row_cells.push(result.cell(&coordinate, measure));
        }
        cells.push(row_cells);
    }
    Ok(ResultGrid { column_headers, row_headers, cells })
}

pub(crate) enum BoundAxis {
    Measures(Vec<String>),
    /// Effective (dimension, level) with the expanded member list; `Children`
    /// expressions bind at their child level.
    Dim { dimension: String, level: String, members: Vec<String> },
}

pub(crate) struct BoundQuery {
    pub columns: BoundAxis,
    pub rows: Option<BoundAxis>,
    pub slicer_members: Vec<(String, String, String)>,
    pub measures: Vec<String>,
}

impl BoundQuery {
    /// The measure evaluated at grid position (r, c).
    pub fn cell_measure(&self, r: usize, c: usize) -> &str {
        match (&self.columns, &self.rows) {
            (BoundAxis::Measures(names), _) => &names[c],
            (_, Some(BoundAxis::Measures(names))) => &names[r],
            _ => &self.measures[0], // the single slicer measure
        }
    }
}

/// Resolve a parsed query against the schema and dimension content.
pub(crate) fn bind_query(q: &MdxQuery, wh: &Warehouse) -> Result<BoundQuery, MdxError> {
    let fact_name = &wh.schema().fact.name;
    if &q.cube != fact_name {
        return Err(MdxError::UnknownCube { name: q.cube.clone(), fact: fact_name.clone() });
    }

    let columns = bind_set(&q.columns, wh)?;
    let rows = q.rows.as_ref().map(|r| bind_set(r, wh)).transpose()?;

    let mut slicer_members: Vec<(String, String, String)> = Vec::new();
    let mut slicer_measures: Vec<String> = Vec::new();
    if let Some(slicer) = &q.slicer {
        for expr in slicer {
            match expr {
                SlicerExpr::Member(p) => slicer_members.push((
                    p.dimension.clone(),
                    p.level.clone(),
                    p.member.clone(),
                )),
                SlicerExpr::Measure(name) => {
                    if wh.schema().fact.measure(name).is_none() {
                        return Err(MdxError::Cube(CubeError::UnknownMeasure(name.clone())));
                    }
                    slicer_measures.push(name.clone());
                }
            }
        }
    }
    if slicer_measures.len() > 1 {
        return Err(MdxError::MixedSet("a slicer carries at most one measure".to_string()));
    }

    // measures live on exactly one axis or the slicer
    let mut measure_places = Vec::new();
    if let BoundAxis::Measures(names) = &columns {
        measure_places.push(names.clone());
    }
    if let Some(BoundAxis::Measures(names)) = &rows {
        measure_places.push(names.clone());
    }
    if !slicer_measures.is_empty() {
        measure_places.push(slicer_measures);
    }
    let measures = match measure_places.as_slice() {
        [] => return Err(MdxError::NoMeasures),
        [one] => one.clone(),
        _ => return Err(MdxError::MeasuresOnMultipleAxes),
    };
    Ok(BoundQuery { columns, rows, slicer_members, measures })
}

/// Classify and expand one axis set. All expressions must be measures, or
/// all must resolve to members of one (dimension, level).
fn bind_set(set: &[SetExpr], wh: &Warehouse) -> Result<BoundAxis, MdxError> {
    if set.is_empty() {
        return Err(MdxError::EmptySet);
    }
    if set.iter().any(|e| matches!(e, SetExpr::Measure(_))) {
        let mut names = Vec::new();
        for expr in set {
            match expr {
                SetExpr::Measure(name) => {
                    if wh.schema().fact.measure(name).is_none() {
                        return Err(MdxError::Cube(CubeError::UnknownMeasure(name.clone())));
                    }
                    if names.contains(name) {
                        return Err(MdxError::DuplicateMember(name.clone()));
                    }
                    names.push(name.clone());
                }
                other => {
                    return Err(MdxError::MixedSet(format!(
                        "measures cannot mix with {other:?}"
                    )))
                }
            }
        }
        return Ok(BoundAxis::Measures(names));
    }

    let mut bound: Option<(String, String)> = None;
    let mut members: Vec<String> = Vec::new();
    for expr in set {
        let (dimension, level, expansion) = match expr {
            SetExpr::Member(p) => {
                let values = level_values(wh, &p.dimension, &p.level)?;
                if !values.contains(&p.member) {
                    return Err(MdxError::Cube(CubeError::UnknownMember {
                        dim: p.dimension.clone(),
                        level: p.level.clone(),
                        member: p.member.clone(),
                    }));
                }
                (p.dimension.clone(), p.level.clone(), vec![p.member.clone()])
            }
            SetExpr::Members { dimension, level } => {
                let values = level_values(wh, dimension, level)?;
                (dimension.clone(), level.clone(), values)
            }
            SetExpr::Children(p) => {
                let (child_level, values) = children_values(wh, p)?;
                (p.dimension.clone(), child_level, values)
            }
            SetExpr::Measure(_) => unreachable!("measure sets handled above"),
        };
        match &bound {
            None => bound = Some((dimension, level)),
            Some((d, l)) if *d == dimension && *l == level => {}
            Some((d, l)) => {
                return Err(MdxError::MixedSet(format!(
                    "axis binds {d:?}.{l:?} but also {dimension:?}.{level:?}"
                )))
            }
        }
        for member in expansion {
            if members.contains(&member) {
                return Err(MdxError::DuplicateMember(member));
            }
            members.push(member);
        }
    }
    let (dimension, level) = bound.expect("non-empty set");
    Ok(BoundAxis::Dim { dimension, level, members })
}

/// Distinct member values at a level over current rows, kind-aware sorted.
fn level_values(wh: &Warehouse, dim: &str, level: &str) -> Result<Vec<String>, MdxError> {
    let def = wh
        .schema()
        .dimension(dim)
        .ok_or_else(|| CubeError::UnknownDimension(dim.to_string()))?;
    let attr = def.attribute(level).ok_or_else(|| CubeError::UnknownLevel {
        dim: dim.to_string(),
        level: level.to_string(),
    })?;
    let mut distinct = std::collections::BTreeSet::new();
    for row in wh.dimension_rows(dim)? {
        if row.validity.is_open() {
            distinct.insert(row.attributes[level].render());
        }
    }
    let mut values: Vec<String> = distinct.into_iter().collect();
    member_sort(&mut values, attr.kind);
    Ok(values)
}

/// Expand `[Dim].[Level].[Member].Children`: the child level name and the
/// distinct child values within the parent member.
fn children_values(wh: &Warehouse, p: &MemberPath) -> Result<(String, Vec<String>), MdxError> {
    let def = wh
        .schema()
        .dimension(&p.dimension)
        .ok_or_else(|| CubeError::UnknownDimension(p.dimension.clone()))?;
    if def.attribute(&p.level).is_none() {
        return Err(MdxError::Cube(CubeError::UnknownLevel {
            dim: p.dimension.clone(),
            level: p.level.clone(),
        }));
    }
    if !def.hierarchy.contains(&p.level) {
        return Err(MdxError::Cube(CubeError::NotInHierarchy {
            dim: p.dimension.clone(),
            level: p.level.clone(),
        }));
    }
    let child_level = def
        .finer_level(&p.level)
        .ok_or_else(|| CubeError::AtFinestLevel {
            dim: p.dimension.clone(),
            level: p.level.clone(),
        })?
        .to_string();
    let child_kind = def.attribute(&child_level).expect("hierarchy levels are attributes").kind;

    let mut parent_seen = false;
    let mut distinct = std::collections::BTreeSet::new();
    for row in wh.dimension_rows(&p.dimension)? {
        if !row.validity.is_open() {
            continue;
        }
        if row.attributes[&p.level].render() == p.member {
            parent_seen = true;
            distinct.insert(row.attributes[&child_level].render());
        }
    }
    if !parent_seen {
        return Err(MdxError::Cube(CubeError::UnknownMember {
            dim: p.dimension.clone(),
            level: p.level.clone(),
            member: p.member.clone(),
        }));
    }
    let mut values: Vec<String> = distinct.into_iter().collect();
    member_sort(&mut values, child_kind);
    Ok((child_level, values))
}
