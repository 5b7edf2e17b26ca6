//! Declarative star-schema metadata.
//!
//! A `StarSchema` is a single fact definition surrounded by dimension
//! definitions, plus cross-reference maps that fold source-value variants
//! onto canonical natural keys. Schemas are immutable after construction and
//! safe to share across threads.

mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::value::AttributeKind;

pub use text::{parse_schema, print_schema};

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{0}")]
    Semantic(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeDef {
    pub name: String,
    pub kind: AttributeKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionDef {
    pub name: String,
    pub natural_key: String,
    pub attributes: Vec<AttributeDef>,
    /// Drill path, coarsest level first. May be empty for dimensions that do
    /// not participate in drill-down.
    pub hierarchy: Vec<String>,
    /// Whether attribute changes are history-tracked (SCD type 2).
    pub scd2: bool,
}

impl DimensionDef {
    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn key_kind(&self) -> AttributeKind {
        self.attribute(&self.natural_key)
            .map(|a| a.kind)
            .unwrap_or(AttributeKind::Text)
    }

    /// Hierarchy level one step finer than `level`, if any.
    pub fn finer_level(&self, level: &str) -> Option<&str> {
        let pos = self.hierarchy.iter().position(|l| l == level)?;
        self.hierarchy.get(pos + 1).map(String::as_str)
    }

    /// Hierarchy level one step coarser than `level`, if any.
    pub fn coarser_level(&self, level: &str) -> Option<&str> {
        let pos = self.hierarchy.iter().position(|l| l == level)?;
        pos.checked_sub(1).map(|p| self.hierarchy[p].as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeasureKind {
    /// Additive: the cell value is the sum of the fact column.
    Sum,
    /// Count-style column (each fact carries its contribution, typically 1);
    /// aggregates as the sum of the column.
    Count,
    /// Derived: aggregated base column divided by the matching fact count.
    Average { base: String },
    /// Derived: aggregate-then-divide over two base measures.
    Ratio { numerator: String, denominator: String },
}

impl MeasureKind {
    pub fn is_base(&self) -> bool {
        matches!(self, MeasureKind::Sum | MeasureKind::Count)
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureKind::Sum => f.write_str("sum"),
            MeasureKind::Count => f.write_str("count"),
            MeasureKind::Average { base } => write!(f, "average({base})"),
            MeasureKind::Ratio { numerator, denominator } => {
                write!(f, "ratio({numerator},{denominator})")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureDef {
    pub name: String,
    pub kind: MeasureKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactDef {
    pub name: String,
    pub dimension_refs: Vec<String>,
    pub measures: Vec<MeasureDef>,
}

impl FactDef {
    pub fn measure(&self, name: &str) -> Option<&MeasureDef> {
        self.measures.iter().find(|m| m.name == name)
    }

    /// The storable (sum/count) measures, in declaration order.
    pub fn base_measures(&self) -> impl Iterator<Item = &MeasureDef> {
        self.measures.iter().filter(|m| m.kind.is_base())
    }
}

/// Variants of the same real-world value mapped onto one canonical natural
/// key of the target dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossRefMap {
    pub dimension: String,
    pub entries: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarSchema {
    pub dimensions: Vec<DimensionDef>,
    pub fact: FactDef,
    pub crossrefs: Vec<CrossRefMap>,
}

impl StarSchema {
    pub fn dimension(&self, name: &str) -> Option<&DimensionDef> {
        self.dimensions.iter().find(|d| d.name == name)
    }

    pub fn crossref(&self, dimension: &str) -> Option<&CrossRefMap> {
        self.crossrefs.iter().find(|c| c.dimension == dimension)
    }

    /// Check every structural invariant; `parse_schema` runs this before
    /// returning, and programmatically built schemas should call it too.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let err = |msg: String| Err(SchemaError::Semantic(msg));

        let mut dim_names = BTreeSet::new();
        for dim in &self.dimensions {
            if !is_identifier(&dim.name) {
                return err(format!("invalid dimension name {:?}", dim.name));
            }
            if !dim_names.insert(dim.name.as_str()) {
                return err(format!("duplicate dimension {:?}", dim.name));
            }
            if dim.attributes.is_empty() {
                return err(format!("dimension {:?} has no attributes", dim.name));
            }
            let mut attr_names = BTreeSet::new();
            for attr in &dim.attributes {
                if !is_identifier(&attr.name) {
                    return err(format!(
                        "invalid attribute name {:?} in dimension {:?}",
                        attr.name, dim.name
                    ));
                }
                if !attr_names.insert(attr.name.as_str()) {
                    return err(format!(
                        "duplicate attribute {:?} in dimension {:?}",
                        attr.name, dim.name
                    ));
                }
            }
            if !attr_names.contains(dim.natural_key.as_str()) {
                return err(format!(
                    "natural key {:?} is not an attribute of dimension {:?}",
                    dim.natural_key, dim.name
                ));
            }
            let mut seen_levels = BTreeSet::new();
            for level in &dim.hierarchy {
                if !attr_names.contains(level.as_str()) {
                    return err(format!(
                        "hierarchy level {:?} is not an attribute of dimension {:?}",
                        level, dim.name
                    ));
                }
                if !seen_levels.insert(level.as_str()) {
                    return err(format!(
                        "duplicate hierarchy level {:?} in dimension {:?}",
                        level, dim.name
                    ));
                }
            }
        }

        if !is_identifier(&self.fact.name) {
            return err(format!("invalid fact name {:?}", self.fact.name));
        }
        if self.fact.dimension_refs.is_empty() {
            return err(format!("fact {:?} references no dimensions", self.fact.name));
        }
        let mut refs = BTreeSet::new();
        for dref in &self.fact.dimension_refs {
            if !dim_names.contains(dref.as_str()) {
                return err(format!(
                    "fact {:?} references undeclared dimension {:?}",
                    self.fact.name, dref
                ));
            }
            if !refs.insert(dref.as_str()) {
                return err(format!(
                    "fact {:?} references dimension {:?} twice",
                    self.fact.name, dref
                ));
            }
        }
        if self.fact.measures.is_empty() {
            return err(format!("fact {:?} declares no measures", self.fact.name));
        }
        let mut measure_names = BTreeSet::new();
        for m in &self.fact.measures {
            if !is_identifier(&m.name) {
                return err(format!("invalid measure name {:?}", m.name));
            }
            if !measure_names.insert(m.name.as_str()) {
                return err(format!("duplicate measure {:?}", m.name));
            }
        }
        for m in &self.fact.measures {
            let check_base = |name: &str, role: &str| {
                match self.fact.measure(name) {
                    Some(b) if b.kind.is_base() => Ok(()),
                    Some(_) => err(format!(
                        "measure {:?}: {role} {:?} must be a sum or count measure",
                        m.name, name
                    )),
                    None => err(format!(
                        "measure {:?}: {role} {:?} is not a declared measure",
                        m.name, name
                    )),
                }
            };
            match &m.kind {
                MeasureKind::Average { base } => check_base(base, "average base")?,
                MeasureKind::Ratio { numerator, denominator } => {
                    check_base(numerator, "numerator")?;
                    check_base(denominator, "denominator")?;
                }
                _ => {}
            }
        }

        let mut crossref_dims = BTreeSet::new();
        for cr in &self.crossrefs {
            if !dim_names.contains(cr.dimension.as_str()) {
                return err(format!(
                    "crossref targets undeclared dimension {:?}",
                    cr.dimension
                ));
            }
            if !crossref_dims.insert(cr.dimension.as_str()) {
                return err(format!("duplicate crossref for dimension {:?}", cr.dimension));
            }
        }
        Ok(())
    }
}

/// Outcome of a schema-level check: never an error, always a report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub passed: bool,
    /// Dimensions not referenced by the fact.
    pub orphans: Vec<String>,
    pub notes: Vec<String>,
}

/// Subject orientation: one fact, and every declared dimension hangs off it
/// (a single connected star). Orphan dimensions are listed.
pub fn validate_subject_orientation(schema: &StarSchema) -> ValidationReport {
    let mut notes = Vec::new();
    let orphans: Vec<String> = schema
        .dimensions
        .iter()
        .filter(|d| !schema.fact.dimension_refs.contains(&d.name))
        .map(|d| d.name.clone())
        .collect();
    let mut passed = orphans.is_empty();
    if schema.dimensions.is_empty() {
        passed = false;
        notes.push("schema declares no dimensions".to_string());
    }
    for dref in &schema.fact.dimension_refs {
        if schema.dimension(dref).is_none() {
            passed = false;
            notes.push(format!("fact references undeclared dimension {dref:?}"));
        }
    }
    if !orphans.is_empty() {
        notes.push(format!("orphan dimensions: {}", orphans.join(", ")));
    }
    ValidationReport { passed, orphans, notes }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
