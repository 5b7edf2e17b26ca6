//! The source-to-schema column map.
//!
//! A mapping file binds each source (matched by file stem) to one dimension
//! or the fact, maps source columns onto attributes, dimension references or
//! measures, and carries the per-column date-format and unit-scale rules the
//! transform applies. Grammar in `docs/mapping-format.md`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::date::Date;
use crate::schema::StarSchema;
use crate::value::AttributeKind;

#[derive(Debug, Error, PartialEq)]
pub enum MappingError {
    #[error("mapping line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("mapping: {0}")]
    Semantic(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DateFormat {
    Iso,
    DayMonthYear,
    MonthDayYear,
    CompactYmd,
}

impl DateFormat {
    fn parse_name(s: &str) -> Option<DateFormat> {
        match s {
            "iso" => Some(DateFormat::Iso),
            "dd/mm/yyyy" => Some(DateFormat::DayMonthYear),
            "mm/dd/yyyy" => Some(DateFormat::MonthDayYear),
            "yyyymmdd" => Some(DateFormat::CompactYmd),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnTarget {
    /// Dimension-source column feeding an attribute.
    Attribute(String),
    /// Fact-source column referencing a dimension (by natural key, crossref
    /// variant or descriptive attribute value).
    DimensionRef(String),
    /// Fact-source column feeding a base measure.
    Measure(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnRule {
    pub source: String,
    pub target: ColumnTarget,
    pub date_format: Option<DateFormat>,
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EffectiveRule {
    /// Effective date read from a source column.
    Column { column: String, format: DateFormat },
    /// Fixed effective date for reference data without version history.
    Fixed(Date),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SourceTarget {
    Dimension(String),
    Fact(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceMapping {
    pub stem: String,
    pub target: SourceTarget,
    pub effective: Option<EffectiveRule>,
    pub asof_column: Option<String>,
    pub columns: Vec<ColumnRule>,
}

impl SourceMapping {
    /// Every source column the header must declare.
    pub fn expected_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.columns.iter().map(|c| c.source.clone()).collect();
        if let Some(EffectiveRule::Column { column, .. }) = &self.effective {
            if !cols.contains(column) {
                cols.push(column.clone());
            }
        }
        if let Some(asof) = &self.asof_column {
            if !cols.contains(asof) {
                cols.push(asof.clone());
            }
        }
        cols
    }

    pub fn column(&self, source: &str) -> Option<&ColumnRule> {
        self.columns.iter().find(|c| c.source == source)
    }

    pub fn is_fact(&self) -> bool {
        matches!(self.target, SourceTarget::Fact(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mapping {
    pub sources: Vec<SourceMapping>,
}

impl Mapping {
    pub fn parse(text: &str) -> Result<Mapping, MappingError> {
        let mut sources: Vec<SourceMapping> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let no = idx + 1;
            let trimmed = raw.trim_start();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let indented = raw.len() != trimmed.len();
            let trimmed = trimmed.trim_end();
            let syntax = |msg: String| MappingError::Syntax { line: no, msg };

            if !indented {
                let stem = trimmed
                    .strip_prefix("source ")
                    .ok_or_else(|| syntax("expected `source <stem>`".to_string()))?
                    .trim();
                sources.push(SourceMapping {
                    stem: stem.to_string(),
                    target: SourceTarget::Dimension(String::new()), // placeholder until a target line
                    effective: None,
                    asof_column: None,
                    columns: Vec::new(),
                });
                continue;
            }
            let current = sources
                .last_mut()
                .ok_or_else(|| syntax("indented line before any `source`".to_string()))?;
            let words: Vec<&str> = trimmed.split_whitespace().collect();
            match words.as_slice() {
                ["dimension", name] => current.target = SourceTarget::Dimension(name.to_string()),
                ["fact", name] => current.target = SourceTarget::Fact(name.to_string()),
                ["effective", "fixed", date] => {
                    let date = Date::parse_iso(date)
                        .map_err(|e| syntax(format!("bad fixed effective date: {e}")))?;
                    current.effective = Some(EffectiveRule::Fixed(date));
                }
                ["effective", "column", column] => {
                    current.effective = Some(EffectiveRule::Column {
                        column: column.to_string(),
                        format: DateFormat::Iso,
                    });
                }
                ["effective", "column", column, "date", fmt] => {
                    let format = DateFormat::parse_name(fmt)
                        .ok_or_else(|| syntax(format!("unknown date format {fmt:?}")))?;
                    current.effective =
                        Some(EffectiveRule::Column { column: column.to_string(), format });
                }
                ["asof", column] => current.asof_column = Some(column.to_string()),
                [column_kw, src, "->", rest @ ..] if *column_kw == "column" => {
                    let rule = parse_column_rule(src, rest)
                        .map_err(|msg| syntax(msg))?;
                    current.columns.push(rule);
                }
                _ => return Err(syntax(format!("unrecognized mapping line {trimmed:?}"))),
            }
        }
        if sources.is_empty() {
            return Err(MappingError::Syntax { line: 1, msg: "empty mapping".to_string() });
        }
        Ok(Mapping { sources })
    }

    pub fn source_for_stem(&self, stem: &str) -> Option<&SourceMapping> {
        self.sources.iter().find(|s| s.stem == stem)
    }

    /// Cross-check targets and coverage against a schema.
    pub fn validate(&self, schema: &StarSchema) -> Result<(), MappingError> {
        let err = |msg: String| Err(MappingError::Semantic(msg));
        let mut stems = BTreeSet::new();
        for sm in &self.sources {
            if !stems.insert(sm.stem.as_str()) {
                return err(format!("duplicate source {:?}", sm.stem));
            }
            match &sm.target {
                SourceTarget::Dimension(name) => {
                    let dim = match schema.dimension(name) {
                        Some(d) => d,
                        None if name.is_empty() => {
                            return err(format!("source {:?} declares no target", sm.stem))
                        }
                        None => {
                            return err(format!(
                                "source {:?} targets unknown dimension {name:?}",
                                sm.stem
                            ))
                        }
                    };
                    if sm.effective.is_none() {
                        return err(format!(
                            "dimension source {:?} needs an `effective` rule",
                            sm.stem
                        ));
                    }
                    if sm.asof_column.is_some() {
                        return err(format!("dimension source {:?} cannot use `asof`", sm.stem));
                    }
                    let mut covered = BTreeSet::new();
                    for rule in &sm.columns {
                        let attr_name = match &rule.target {
                            ColumnTarget::Attribute(a) => a,
                            other => {
                                return err(format!(
                                    "dimension source {:?} has non-attribute target {other:?}",
                                    sm.stem
                                ))
                            }
                        };
                        let attr = dim.attribute(attr_name).ok_or_else(|| {
                            MappingError::Semantic(format!(
                                "dimension {name:?} has no attribute {attr_name:?}"
                            ))
                        })?;
                        if !covered.insert(attr_name.clone()) {
                            return err(format!("attribute {attr_name:?} mapped twice"));
                        }
                        if rule.date_format.is_some() && attr.kind != AttributeKind::Date {
                            return err(format!(
                                "date format on non-date attribute {attr_name:?}"
                            ));
                        }
                        if rule.scale.is_some() && attr.kind != AttributeKind::Decimal {
                            return err(format!("scale on non-decimal attribute {attr_name:?}"));
                        }
                    }
                    for attr in &dim.attributes {
                        if !covered.contains(&attr.name) {
                            return err(format!(
                                "source {:?} does not map attribute {:?} of {name:?}",
                                sm.stem, attr.name
                            ));
                        }
                    }
                }
                SourceTarget::Fact(name) => {
                    if name != &schema.fact.name {
                        return err(format!(
                            "source {:?} targets unknown fact {name:?}",
                            sm.stem
                        ));
                    }
                    if sm.asof_column.is_none() {
                        return err(format!("fact source {:?} needs an `asof` column", sm.stem));
                    }
                    let mut dims = BTreeSet::new();
                    let mut measures = BTreeSet::new();
                    for rule in &sm.columns {
                        match &rule.target {
                            ColumnTarget::DimensionRef(d) => {
                                if !schema.fact.dimension_refs.contains(d) {
                                    return err(format!(
                                        "fact does not reference dimension {d:?}"
                                    ));
                                }
                                if !dims.insert(d.clone()) {
                                    return err(format!("dimension {d:?} mapped twice"));
                                }
                            }
                            ColumnTarget::Measure(m) => {
                                match schema.fact.measure(m) {
                                    Some(def) if def.kind.is_base() => {}
                                    Some(_) => {
                                        return err(format!(
                                            "measure {m:?} is derived and cannot be loaded"
                                        ))
                                    }
                                    None => return err(format!("unknown measure {m:?}")),
                                }
                                if !measures.insert(m.clone()) {
                                    return err(format!("measure {m:?} mapped twice"));
                                }
                            }
                            ColumnTarget::Attribute(a) => {
                                return err(format!(
                                    "fact source {:?} cannot map attribute {a:?}",
                                    sm.stem
                                ))
                            }
                        }
                    }
                    for d in &schema.fact.dimension_refs {
                        if !dims.contains(d) {
                            return err(format!(
                                "fact source {:?} does not map dimension {d:?}",
                                sm.stem
                            ));
                        }
                    }
                    for m in schema.fact.measures.iter().filter(|m| m.kind.is_base()) {
                        if !measures.contains(&m.name) {
                            return err(format!(
                                "fact source {:?} does not map measure {:?}",
                                sm.stem, m.name
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn parse_column_rule(src: &str, rest: &[&str]) -> Result<ColumnRule, String> {
    let (target, mut rest) = match rest {
        ["attr", name, tail @ ..] => (ColumnTarget::Attribute(name.to_string()), tail),
        ["dim", name, tail @ ..] => (ColumnTarget::DimensionRef(name.to_string()), tail),
        ["measure", name, tail @ ..] => (ColumnTarget::Measure(name.to_string()), tail),
        _ => return Err("column target must be `attr`, `dim` or `measure`".to_string()),
    };
    let mut rule = ColumnRule {
        source: src.to_string(),
        target,
        date_format: None,
        scale: None,
    };
    while !rest.is_empty() {
        match rest {
            ["date", fmt, tail @ ..] => {
                rule.date_format = Some(
                    DateFormat::parse_name(fmt).ok_or_else(|| format!("unknown date format {fmt:?}"))?,
                );
                rest = tail;
            }
            ["scale", k, tail @ ..] => {
                let k: f64 = k.parse().map_err(|_| format!("bad scale factor {k:?}"))?;
                if !k.is_finite() || k == 0.0 {
                    return Err(format!("scale factor must be finite and nonzero, got {k}"));
                }
                rule.scale = Some(k);
                rest = tail;
            }
            _ => return Err(format!("unrecognized column options {rest:?}")),
        }
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_schema;

    #[test]
    fn reference_mapping_validates_against_reference_schema() {
        let schema = parse_schema(crate::reference_schema_text()).unwrap();
        let mapping = Mapping::parse(crate::reference_mapping_text()).unwrap();
        mapping.validate(&schema).unwrap();
        let treatments = mapping.source_for_stem("treatments").unwrap();
        assert!(treatments.is_fact());
        assert_eq!(treatments.asof_column.as_deref(), Some("treatDate"));
        let patients = mapping.source_for_stem("patients").unwrap();
        assert!(matches!(
            patients.effective,
            Some(EffectiveRule::Column { .. })
        ));
        // effective column is part of the expected header
        assert!(patients.expected_columns().contains(&"effectiveDate".to_string()));
    }

    #[test]
    fn incomplete_attribute_coverage_is_rejected() {
        let schema = parse_schema(crate::reference_schema_text()).unwrap();
        let text = crate::reference_mapping_text().replace("  column organ -> attr organ\n", "");
        let mapping = Mapping::parse(&text).unwrap();
        let err = mapping.validate(&schema).unwrap_err();
        assert!(err.to_string().contains("organ"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        match Mapping::parse("source x\n  wibble\n") {
            Err(MappingError::Syntax { line: 2, .. }) => {}
            other => panic!("expected syntax error at line 2, got {other:?}"),
        }
    }
}
