//! The schema-config text format.
//!
//! Line-oriented: a block opens with an unindented `dimension`, `fact` or
//! `crossref` header and owns the indented lines that follow. Blank lines and
//! `#` comments are ignored. `print_schema` emits the canonical form that
//! `parse_schema` accepts back unchanged; the full grammar is documented in
//! `docs/schema-format.md`.

use std::collections::BTreeMap;

use crate::value::AttributeKind;

use super::{
    AttributeDef, CrossRefMap, DimensionDef, FactDef, MeasureDef, MeasureKind, SchemaError,
    StarSchema,
};

pub fn parse_schema(config_text: &str) -> Result<StarSchema, SchemaError> {
    let mut dimensions: Vec<DimensionDef> = Vec::new();
    let mut fact: Option<FactDef> = None;
    let mut crossrefs: Vec<CrossRefMap> = Vec::new();
    let mut block: Option<Block> = None;

    for (idx, raw) in config_text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indented = raw.len() != trimmed.len();
        let col = raw.len() - trimmed.len() + 1;
        let trimmed = trimmed.trim_end();

        if !indented {
            // close the previous block before opening a new one
            if let Some(b) = block.take() {
                b.finish(&mut dimensions, &mut fact, &mut crossrefs)?;
            }
            block = Some(Block::open(trimmed, line_no, col)?);
        } else {
            match block.as_mut() {
                Some(b) => b.body_line(trimmed, line_no, col)?,
                None => {
                    return Err(syntax(line_no, col, "indented line outside any block"));
                }
            }
        }
    }
    if let Some(b) = block.take() {
        b.finish(&mut dimensions, &mut fact, &mut crossrefs)?;
    }

    let fact = match fact {
        Some(f) => f,
        None if dimensions.is_empty() && crossrefs.is_empty() => {
            return Err(syntax(1, 1, "empty schema config"));
        }
        None => return Err(SchemaError::Semantic("no fact declared".to_string())),
    };
    let schema = StarSchema { dimensions, fact, crossrefs };
    schema.validate()?;
    Ok(schema)
}

pub fn print_schema(schema: &StarSchema) -> String {
    let mut out = String::new();
    for dim in &schema.dimensions {
        out.push_str("dimension ");
        out.push_str(&dim.name);
        if dim.scd2 {
            out.push_str(" scd2");
        }
        out.push('\n');
        for attr in &dim.attributes {
            out.push_str(&format!("  attr {}:{}\n", attr.name, attr.kind));
        }
        out.push_str(&format!("  key {}\n", dim.natural_key));
        if !dim.hierarchy.is_empty() {
            out.push_str(&format!("  hierarchy {}\n", dim.hierarchy.join(" > ")));
        }
        out.push('\n');
    }
    out.push_str(&format!("fact {}\n", schema.fact.name));
    for dref in &schema.fact.dimension_refs {
        out.push_str(&format!("  dim {dref}\n"));
    }
    for m in &schema.fact.measures {
        out.push_str(&format!("  measure {}:{}\n", m.name, m.kind));
    }
    for cr in &schema.crossrefs {
        out.push('\n');
        out.push_str(&format!("crossref {}\n", cr.dimension));
        for (variant, canonical) in &cr.entries {
            out.push_str(&format!(
                "  map {} -> {}\n",
                quote(variant),
                quote(canonical)
            ));
        }
    }
    out
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> SchemaError {
    SchemaError::Syntax { line, col, msg: msg.into() }
}

enum Block {
    Dimension {
        name: String,
        scd2: bool,
        attributes: Vec<AttributeDef>,
        key: Option<String>,
        hierarchy: Vec<String>,
        line: usize,
    },
    Fact {
        name: String,
        dims: Vec<String>,
        measures: Vec<MeasureDef>,
    },
    CrossRef {
        dimension: String,
        entries: BTreeMap<String, String>,
    },
}

impl Block {
    fn open(line: &str, no: usize, col: usize) -> Result<Block, SchemaError> {
        let mut words = line.split_whitespace();
        let head = words.next().unwrap_or_default();
        match head {
            "dimension" => {
                let name = words
                    .next()
                    .ok_or_else(|| syntax(no, col, "dimension header needs a name"))?;
                let scd2 = match words.next() {
                    None => false,
                    Some("scd2") => true,
                    Some(other) => {
                        return Err(syntax(no, col, format!("unexpected token {other:?}")))
                    }
                };
                if words.next().is_some() {
                    return Err(syntax(no, col, "trailing tokens after dimension header"));
                }
                Ok(Block::Dimension {
                    name: name.to_string(),
                    scd2,
                    attributes: Vec::new(),
                    key: None,
                    hierarchy: Vec::new(),
                    line: no,
                })
            }
            "fact" => {
                let name = words
                    .next()
                    .ok_or_else(|| syntax(no, col, "fact header needs a name"))?;
                if words.next().is_some() {
                    return Err(syntax(no, col, "trailing tokens after fact header"));
                }
                Ok(Block::Fact {
                    name: name.to_string(),
                    dims: Vec::new(),
                    measures: Vec::new(),
                })
            }
            "crossref" => {
                let dimension = words
                    .next()
                    .ok_or_else(|| syntax(no, col, "crossref header needs a dimension name"))?;
                if words.next().is_some() {
                    return Err(syntax(no, col, "trailing tokens after crossref header"));
                }
                Ok(Block::CrossRef {
                    dimension: dimension.to_string(),
                    entries: BTreeMap::new(),
                })
            }
            other => Err(syntax(
                no,
                col,
                format!("expected dimension, fact or crossref, found {other:?}"),
            )),
        }
    }

    fn body_line(&mut self, line: &str, no: usize, col: usize) -> Result<(), SchemaError> {
        match self {
            Block::Dimension { attributes, key, hierarchy, .. } => {
                let (head, rest) = split_head(line);
                match head {
                    "attr" => {
                        let (name, kind) = rest.split_once(':').ok_or_else(|| {
                            syntax(no, col, "attr line must look like `attr name:kind`")
                        })?;
                        let kind = AttributeKind::parse_name(kind.trim()).ok_or_else(|| {
                            syntax(no, col, format!("unknown attribute kind {:?}", kind.trim()))
                        })?;
                        attributes.push(AttributeDef { name: name.trim().to_string(), kind });
                    }
                    "key" => {
                        if key.replace(rest.trim().to_string()).is_some() {
                            return Err(syntax(no, col, "duplicate key line"));
                        }
                    }
                    "hierarchy" => {
                        if !hierarchy.is_empty() {
                            return Err(syntax(no, col, "duplicate hierarchy line"));
                        }
                        for level in rest.split('>') {
                            let level = level.trim();
                            if level.is_empty() {
                                return Err(syntax(no, col, "empty hierarchy level"));
                            }
                            hierarchy.push(level.to_string());
                        }
                    }
                    other => {
                        return Err(syntax(
                            no,
                            col,
                            format!("expected attr, key or hierarchy, found {other:?}"),
                        ))
                    }
                }
            }
            Block::Fact { dims, measures, .. } => {
                let (head, rest) = split_head(line);
                match head {
                    "dim" => dims.push(rest.trim().to_string()),
                    "measure" => {
                        let (name, kind) = rest.split_once(':').ok_or_else(|| {
                            syntax(no, col, "measure line must look like `measure name:kind`")
                        })?;
                        let kind = parse_measure_kind(kind.trim())
                            .ok_or_else(|| {
                                syntax(no, col, format!("unknown measure kind {:?}", kind.trim()))
                            })?;
                        measures.push(MeasureDef { name: name.trim().to_string(), kind });
                    }
                    other => {
                        return Err(syntax(
                            no,
                            col,
                            format!("expected dim or measure, found {other:?}"),
                        ))
                    }
                }
            }
            Block::CrossRef { entries, .. } => {
                let (head, rest) = split_head(line);
                if head != "map" {
                    return Err(syntax(no, col, format!("expected map, found {head:?}")));
                }
                let (variant, rest) = take_quoted(rest.trim_start())
                    .ok_or_else(|| syntax(no, col, "map line needs a quoted variant"))?;
                let rest = rest.trim_start();
                let rest = rest
                    .strip_prefix("->")
                    .ok_or_else(|| syntax(no, col, "map line needs `->`"))?;
                let (canonical, tail) = take_quoted(rest.trim_start())
                    .ok_or_else(|| syntax(no, col, "map line needs a quoted canonical key"))?;
                if !tail.trim().is_empty() {
                    return Err(syntax(no, col, "trailing tokens after map entry"));
                }
                if entries.insert(variant.clone(), canonical).is_some() {
                    return Err(SchemaError::Semantic(format!(
                        "duplicate crossref variant {variant:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn finish(
        self,
        dimensions: &mut Vec<DimensionDef>,
        fact: &mut Option<FactDef>,
        crossrefs: &mut Vec<CrossRefMap>,
    ) -> Result<(), SchemaError> {
        match self {
            Block::Dimension { name, scd2, attributes, key, hierarchy, line } => {
                let natural_key = key.ok_or_else(|| {
                    SchemaError::Semantic(format!(
                        "dimension {name:?} (line {line}) declares no key"
                    ))
                })?;
                dimensions.push(DimensionDef { name, natural_key, attributes, hierarchy, scd2 });
            }
            Block::Fact { name, dims, measures } => {
                if fact.is_some() {
                    return Err(SchemaError::Semantic(format!(
                        "second fact {name:?}: a star schema has exactly one fact"
                    )));
                }
                *fact = Some(FactDef { name, dimension_refs: dims, measures });
            }
            Block::CrossRef { dimension, entries } => {
                crossrefs.push(CrossRefMap { dimension, entries });
            }
        }
        Ok(())
    }
}

fn split_head(line: &str) -> (&str, &str) {
    match line.split_once(char::is_whitespace) {
        Some((h, r)) => (h, r),
        None => (line, ""),
    }
}

fn parse_measure_kind(text: &str) -> Option<MeasureKind> {
    match text {
        "sum" => return Some(MeasureKind::Sum),
        "count" => return Some(MeasureKind::Count),
        _ => {}
    }
    let inner = |prefix: &str| {
        text.strip_prefix(prefix)?
            .strip_prefix('(')?
            .strip_suffix(')')
    };
    if let Some(args) = inner("average") {
        return Some(MeasureKind::Average { base: args.trim().to_string() });
    }
    if let Some(args) = inner("ratio") {
        let (num, den) = args.split_once(',')?;
        return Some(MeasureKind::Ratio {
            numerator: num.trim().to_string(),
            denominator: den.trim().to_string(),
        });
    }
    None
}

/// Parse a leading `"..."` (supporting `\"` and `\\` escapes); returns the
/// unescaped content and the remaining text.
fn take_quoted(text: &str) -> Option<(String, &str)> {
    let rest = text.strip_prefix('"')?;
    let mut out = String::new();
    let mut chars = rest.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Some((out, &rest[i + 1..])),
            '\\' => match chars.next() {
                Some((_, '"')) => out.push('"'),
                Some((_, '\\')) => out.push('\\'),
                _ => return None,
            },
            c => out.push(c),
        }
    }
    None
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
dimension DimPatient scd2
  attr patientNo:text
  attr stage:text
  key patientNo

dimension DimCancerType
  attr cancerCode:text
  attr cancerName:text
  key cancerCode

dimension DimProcedure
  attr procCode:text
  key procCode

dimension DimDate
  attr dateKey:integer
  attr year:integer
  key dateKey
  hierarchy year > dateKey

fact FactTreatment
  dim DimPatient
  dim DimCancerType
  dim DimProcedure
  dim DimDate
  measure cost:sum
  measure deaths:sum
  measure patients:count
  measure deathRate:ratio(deaths,patients)

crossref DimCancerType
  map "LEU" -> "C91"
  map "Leukaemia" -> "C91"
"#;

    #[test]
    fn parses_four_dims_one_fact() {
        let s = parse_schema(SMALL).unwrap();
        assert_eq!(s.dimensions.len(), 4);
        assert_eq!(s.fact.measures.len(), 4);
        assert!(s.dimension("DimPatient").unwrap().scd2);
        assert!(!s.dimension("DimCancerType").unwrap().scd2);
        assert_eq!(
            s.crossref("DimCancerType").unwrap().entries["LEU"],
            "C91"
        );
        assert_eq!(
            s.fact.measure("deathRate").unwrap().kind,
            MeasureKind::Ratio { numerator: "deaths".into(), denominator: "patients".into() }
        );
    }

    #[test]
    fn dangling_dimension_ref_names_the_dimension() {
        let text = SMALL.replace("dim DimProcedure", "dim DimDrug");
        let err = parse_schema(&text).unwrap_err();
        match err {
            SchemaError::Semantic(msg) => assert!(msg.contains("DimDrug"), "{msg}"),
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_a_syntax_error() {
        match parse_schema("") {
            Err(SchemaError::Syntax { line: 1, .. }) => {}
            other => panic!("expected syntax error at line 1, got {other:?}"),
        }
        match parse_schema("\n  # just a comment\n") {
            Err(SchemaError::Syntax { .. }) => {}
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "dimension D\n  attr a:text\n  key a\n  wobble x\nfact F\n  dim D\n  measure m:sum\n";
        match parse_schema(text) {
            Err(SchemaError::Syntax { line: 4, .. }) => {}
            other => panic!("expected syntax error at line 4, got {other:?}"),
        }
    }

    #[test]
    fn print_parse_round_trip() {
        let s = parse_schema(SMALL).unwrap();
        let printed = print_schema(&s);
        let reparsed = parse_schema(&printed).unwrap();
        assert_eq!(s, reparsed);
        // printing is idempotent
        assert_eq!(printed, print_schema(&reparsed));
    }

    #[test]
    fn quoted_variants_round_trip_escapes() {
        let mut s = parse_schema(SMALL).unwrap();
        s.crossrefs[0]
            .entries
            .insert("we\"ird \\ name".to_string(), "C91".to_string());
        let reparsed = parse_schema(&print_schema(&s)).unwrap();
        assert_eq!(s, reparsed);
    }

    #[test]
    fn duplicate_axis_names_rejected() {
        let text = SMALL.replace("attr stage:text", "attr patientNo:text");
        assert!(matches!(parse_schema(&text), Err(SchemaError::Semantic(_))));
    }
}
