//! Conforming transform: raw staged text to typed warehouse rows.
//!
//! Dates are normalized from their declared source format to ISO, decimals
//! are canonicalized (thousands separators stripped) and unit-scaled,
//! dimension references are resolved to canonical natural keys through the
//! crossref map. Coercion failures reject the record with a logged reason;
//! transform never throws per-record errors.

use std::collections::BTreeMap;

use crate::date::Date;
use crate::store::Warehouse;
use crate::value::{AttributeKind, Value};

use super::extract::{Lineage, StagingRecord};
use super::mapping::{ColumnTarget, DateFormat, EffectiveRule, SourceMapping, SourceTarget};
use super::{ActionKind, CleansingAction};

/// A staged record conformed to the schema, ready to apply.
#[derive(Clone, Debug, PartialEq)]
pub enum ConformedRow {
    Dimension {
        lineage: Lineage,
        dim: String,
        natural_key: String,
        attributes: BTreeMap<String, Value>,
        effective: Date,
    },
    Fact {
        lineage: Lineage,
        dim_naturals: BTreeMap<String, String>,
        measures: BTreeMap<String, f64>,
        as_of: Date,
    },
}

impl ConformedRow {
    pub fn lineage(&self) -> &Lineage {
        match self {
            ConformedRow::Dimension { lineage, .. } => lineage,
            ConformedRow::Fact { lineage, .. } => lineage,
        }
    }
}

/// Transform cleansed records. Failures become rejection actions.
pub fn transform(
    records: &[StagingRecord],
    source: &SourceMapping,
    wh: &Warehouse,
) -> (Vec<ConformedRow>, Vec<CleansingAction>) {
    let mut rows = Vec::with_capacity(records.len());
    let mut rejections = Vec::new();
    for record in records {
        match transform_one(record, source, wh) {
            Ok(row) => rows.push(row),
            Err((field, reason)) => {
                let original = record.fields.get(&field).cloned().unwrap_or_default();
                rejections.push(CleansingAction {
                    lineage: record.lineage.clone(),
                    field,
                    original,
                    corrected: String::new(),
                    similarity: 0.0,
                    kind: ActionKind::Rejected,
                    note: reason,
                });
            }
        }
    }
    (rows, rejections)
}

type FieldError = (String, String);

fn transform_one(
    record: &StagingRecord,
    source: &SourceMapping,
    wh: &Warehouse,
) -> Result<ConformedRow, FieldError> {
    match &source.target {
        SourceTarget::Dimension(dim_name) => {
            let def = wh
                .schema()
                .dimension(dim_name)
                .expect("mapping was validated against the schema");
            let mut attributes = BTreeMap::new();
            for rule in &source.columns {
                let ColumnTarget::Attribute(attr_name) = &rule.target else {
                    continue;
                };
                let attr = def.attribute(attr_name).expect("mapping validated");
                let raw = &record.fields[&rule.source];
                let value = coerce(raw, attr.kind, rule.date_format, rule.scale)
                    .map_err(|reason| (rule.source.clone(), reason))?;
                attributes.insert(attr_name.clone(), value);
            }
            let natural_key = attributes[&def.natural_key].render();
            let effective = match source.effective.as_ref().expect("mapping validated") {
                EffectiveRule::Fixed(d) => *d,
                EffectiveRule::Column { column, format } => {
                    let raw = &record.fields[column];
                    parse_date(raw, *format).map_err(|reason| (column.clone(), reason))?
                }
            };
            Ok(ConformedRow::Dimension {
                lineage: record.lineage.clone(),
                dim: dim_name.clone(),
                natural_key,
                attributes,
                effective,
            })
        }
        SourceTarget::Fact(_) => {
            let mut dim_naturals = BTreeMap::new();
            let mut measures = BTreeMap::new();
            let mut as_of: Option<Date> = None;
            let asof_column = source.asof_column.as_ref().expect("mapping validated");
            for rule in &source.columns {
                let raw = &record.fields[&rule.source];
                match &rule.target {
                    ColumnTarget::DimensionRef(dim) => {
                        let natural = if let Some(fmt) = rule.date_format {
                            let date =
                                parse_date(raw, fmt).map_err(|r| (rule.source.clone(), r))?;
                            if &rule.source == asof_column {
                                as_of = Some(date);
                            }
                            date.yyyymmdd().to_string()
                        } else {
                            resolve_dim_reference(wh, dim, raw)
                                .map_err(|r| (rule.source.clone(), r))?
                        };
                        dim_naturals.insert(dim.clone(), natural);
                    }
                    ColumnTarget::Measure(name) => {
                        let v = parse_decimal(raw).map_err(|r| (rule.source.clone(), r))?;
                        let v = v * rule.scale.unwrap_or(1.0);
                        if !v.is_finite() {
                            return Err((rule.source.clone(), "non-finite measure".to_string()));
                        }
                        measures.insert(name.clone(), v);
                    }
                    ColumnTarget::Attribute(_) => unreachable!("mapping validated"),
                }
            }
            let as_of = match as_of {
                Some(d) => d,
                None => {
                    let raw = record.fields.get(asof_column).ok_or_else(|| {
                        (asof_column.clone(), "missing as-of column".to_string())
                    })?;
                    let fmt = source
                        .column(asof_column)
                        .and_then(|r| r.date_format)
                        .unwrap_or(DateFormat::Iso);
                    parse_date(raw, fmt).map_err(|r| (asof_column.clone(), r))?
                }
            };
            Ok(ConformedRow::Fact {
                lineage: record.lineage.clone(),
                dim_naturals,
                measures,
                as_of,
            })
        }
    }
}

/// Resolve a dimension reference to a canonical natural key: crossref variant
/// first, then an existing natural key, then a unique descriptive-attribute
/// value of a current row.
fn resolve_dim_reference(wh: &Warehouse, dim: &str, raw: &str) -> Result<String, String> {
    let resolved = wh
        .resolve_crossref(dim, raw)
        .map_err(|e| e.to_string())?;
    if wh
        .current_row(dim, &resolved)
        .map_err(|e| e.to_string())?
        .is_some()
    {
        return Ok(resolved);
    }
    // fall back to matching a descriptive attribute value
    let def = wh.schema().dimension(dim).ok_or_else(|| format!("unknown dimension {dim:?}"))?;
    let rows = wh.dimension_rows(dim).map_err(|e| e.to_string())?;
    let mut matched: Option<&str> = None;
    for row in rows.iter().filter(|r| r.validity.is_open()) {
        for attr in &def.attributes {
            if attr.kind == AttributeKind::Text
                && attr.name != def.natural_key
                && row.attributes[&attr.name].render() == raw
            {
                match matched {
                    None => matched = Some(&row.natural_key),
                    Some(prev) if prev == row.natural_key => {}
                    Some(_) => {
                        return Err(format!(
                            "dimension reference {raw:?} is ambiguous in {dim:?}"
                        ))
                    }
                }
            }
        }
    }
    match matched {
        Some(key) => Ok(key.to_string()),
        // pass the resolved text through; the store names key and date if it
        // cannot cover it at load time
        None => Ok(resolved),
    }
}

/// Canonicalize decimal text: trim, strip thousands separators, parse.
pub fn parse_decimal(raw: &str) -> Result<f64, String> {
    let cleaned: String = raw.trim().chars().filter(|c| *c != ',').collect();
    if cleaned.is_empty() {
        return Err("empty decimal".to_string());
    }
    let v: f64 = cleaned
        .parse()
        .map_err(|_| format!("cannot parse {raw:?} as a decimal"))?;
    if !v.is_finite() {
        return Err(format!("non-finite decimal {raw:?}"));
    }
    Ok(v)
}

/// Parse a date in the declared source format.
pub fn parse_date(raw: &str, format: DateFormat) -> Result<Date, String> {
    let raw = raw.trim();
    let split3 = |sep: char| -> Result<(u32, u32, u32), String> {
        let parts: Vec<&str> = raw.split(sep).collect();
        if parts.len() != 3 {
            return Err(format!("cannot parse {raw:?} as a date"));
        }
        let mut nums = [0u32; 3];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| format!("cannot parse {raw:?} as a date"))?;
        }
        Ok((nums[0], nums[1], nums[2]))
    };
    let date = match format {
        DateFormat::Iso => Date::parse_iso(raw).map_err(|_| invalid(raw))?,
        DateFormat::DayMonthYear => {
            let (d, m, y) = split3('/')?;
            Date::new(y as i32, m, d).map_err(|_| invalid(raw))?
        }
        DateFormat::MonthDayYear => {
            let (m, d, y) = split3('/')?;
            Date::new(y as i32, m, d).map_err(|_| invalid(raw))?
        }
        DateFormat::CompactYmd => {
            let n: u32 = raw.parse().map_err(|_| format!("cannot parse {raw:?} as a date"))?;
            Date::from_yyyymmdd(n).map_err(|_| invalid(raw))?
        }
    };
    Ok(date)
}

fn invalid(raw: &str) -> String {
    format!("invalid calendar date {raw:?}")
}

fn coerce(
    raw: &str,
    kind: AttributeKind,
    date_format: Option<DateFormat>,
    scale: Option<f64>,
) -> Result<Value, String> {
    match kind {
        AttributeKind::Text => Ok(Value::Text(raw.to_string())),
        AttributeKind::Integer => raw
            .trim()
            .parse::<i64>()
            .map(Value::Integer)
            .map_err(|_| format!("cannot parse {raw:?} as an integer")),
        AttributeKind::Decimal => {
            let v = parse_decimal(raw)? * scale.unwrap_or(1.0);
            Value::decimal(v).map_err(|e| e.to_string())
        }
        AttributeKind::Date => {
            let date = parse_date(raw, date_format.unwrap_or(DateFormat::Iso))?;
            Ok(Value::Date(date))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn date_formats_normalize_to_iso() {
        assert_eq!(
            parse_date("01/06/2011", DateFormat::DayMonthYear).unwrap().to_string(),
            "2011-06-01"
        );
        assert_eq!(
            parse_date("06/01/2011", DateFormat::MonthDayYear).unwrap().to_string(),
            "2011-06-01"
        );
        assert_eq!(
            parse_date("20110601", DateFormat::CompactYmd).unwrap().to_string(),
            "2011-06-01"
        );
        assert_eq!(
            parse_date("2011-06-01", DateFormat::Iso).unwrap().to_string(),
            "2011-06-01"
        );
    }

    #[test]
    fn impossible_dates_are_named() {
        let err = parse_date("31/02/2011", DateFormat::DayMonthYear).unwrap_err();
        assert!(err.contains("invalid calendar date"), "{err}");
    }

    #[test]
    fn decimals_are_canonicalized() {
        assert_eq!(parse_decimal("1,500.00").unwrap(), 1500.00);
        assert_eq!(parse_decimal(" 42 ").unwrap(), 42.0);
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("").is_err());
    }
}
