//! Fuzzy-lookup cleansing and deduplication.
//!
//! Dimension-coded fields of fact sources are checked against the reference
//! vocabulary drawn from the warehouse: exact (or crossref-variant) hits pass
//! untouched, near misses are corrected to the best vocabulary entry at or
//! above the threshold, and unmatched values reject the record. Records that
//! are identical on every field after correction collapse to the first
//! occurrence. Every input record ends in exactly one disposition and every
//! non-trivial disposition is logged as an action.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::store::Warehouse;
use crate::value::AttributeKind;

use super::mapping::{ColumnTarget, SourceMapping};
use super::matching::{fuzzy_lookup, LookupOutcome};
use super::{ActionKind, CleansingAction, StagingRecord};

/// The reference vocabulary for one dimension: natural keys, crossref
/// variants, and the distinct text-attribute values of current rows. Sorted
/// lexicographically so lookup tie-breaks are deterministic.
pub fn reference_vocabulary(wh: &Warehouse, dim: &str) -> Vec<String> {
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    if let Ok(rows) = wh.dimension_rows(dim) {
        let def = wh.schema().dimension(dim).expect("rows imply the dimension exists");
        for row in rows {
            vocab.insert(row.natural_key.clone());
            if row.validity.is_open() {
                for attr in &def.attributes {
                    if attr.kind == AttributeKind::Text && attr.name != def.natural_key {
                        vocab.insert(row.attributes[&attr.name].render());
                    }
                }
            }
        }
    }
    if let Some(cr) = wh.schema().crossref(dim) {
        vocab.extend(cr.entries.keys().cloned());
    }
    vocab.into_iter().collect()
}

/// Cleanse staged records against the warehouse vocabularies. Returns the
/// surviving records (corrections applied in place) and the action log.
pub fn cleanse(
    records: Vec<StagingRecord>,
    wh: &Warehouse,
    source: &SourceMapping,
    threshold: f64,
) -> (Vec<StagingRecord>, Vec<CleansingAction>) {
    // Fields subject to fuzzy lookup: fact-source dimension references that
    // are not dates (dates are validated by calendar parsing instead).
    let fuzzy_fields: Vec<(&str, &str)> = if source.is_fact() {
        source
            .columns
            .iter()
            .filter(|c| c.date_format.is_none())
            .filter_map(|c| match &c.target {
                ColumnTarget::DimensionRef(dim) => Some((c.source.as_str(), dim.as_str())),
                _ => None,
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut vocabularies: HashMap<&str, (Vec<String>, HashSet<String>)> = HashMap::new();
    for (_, dim) in &fuzzy_fields {
        vocabularies.entry(dim).or_insert_with(|| {
            let list = reference_vocabulary(wh, dim);
            let set = list.iter().cloned().collect();
            (list, set)
        });
    }

    let mut kept = Vec::with_capacity(records.len());
    let mut actions = Vec::new();
    let mut seen: HashSet<Vec<(String, String)>> = HashSet::new();

    'records: for mut record in records {
        let mut touched = false;
        for (field, dim) in &fuzzy_fields {
            let raw = record.fields[*field].clone();
            let (list, set) = &vocabularies[dim];
            if set.contains(&raw) || list.is_empty() {
                continue; // exact/crossref hit, or nothing to check against
            }
            match fuzzy_lookup(&raw, list, threshold) {
                LookupOutcome::Match { entry, score, .. } => {
                    actions.push(CleansingAction {
                        lineage: record.lineage.clone(),
                        field: field.to_string(),
                        original: raw,
                        corrected: entry.clone(),
                        similarity: score,
                        kind: ActionKind::Corrected,
                        note: String::new(),
                    });
                    record.fields.insert(field.to_string(), entry);
                    touched = true;
                }
                LookupOutcome::Unmatched { best } => {
                    let (candidate, score) = best.unwrap_or_default();
                    actions.push(CleansingAction {
                        lineage: record.lineage.clone(),
                        field: field.to_string(),
                        original: raw,
                        corrected: String::new(),
                        similarity: score,
                        kind: ActionKind::Rejected,
                        note: format!("no vocabulary match (best {candidate:?})"),
                    });
                    continue 'records;
                }
            }
        }

        let identity: Vec<(String, String)> = record
            .fields
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        if !seen.insert(identity) {
            actions.push(CleansingAction {
                lineage: record.lineage.clone(),
                field: String::new(),
                original: String::new(),
                corrected: String::new(),
                similarity: 1.0,
                kind: ActionKind::Deduplicated,
                note: "identical to an earlier record".to_string(),
            });
            continue;
        }
        if !touched {
            actions.push(CleansingAction {
                lineage: record.lineage.clone(),
                field: String::new(),
                original: String::new(),
                corrected: String::new(),
                similarity: 1.0,
                kind: ActionKind::Passed,
                note: String::new(),
            });
        }
        kept.push(record);
    }
    (kept, actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::Date;
    use crate::etl::extract::Lineage;
    use crate::etl::mapping::Mapping;
    use crate::schema::parse_schema;
    use crate::value::Value;
    use std::collections::BTreeMap;

    fn warehouse_with_cancers() -> Warehouse {
        let schema = parse_schema(crate::reference_schema_text()).unwrap();
        let mut wh = Warehouse::new(schema).unwrap();
        for (code, name, organ) in [
            ("C91", "Leukemia", "Blood"),
            ("C81", "Lymphoma", "Blood"),
            ("C43", "Melanoma", "Skin"),
        ] {
            let attrs: BTreeMap<String, Value> = [
                ("cancerCode", Value::Text(code.into())),
                ("cancerName", Value::Text(name.into())),
                ("organ", Value::Text(organ.into())),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            wh.upsert_dimension_row("DimCancerType", code, attrs, Date::new(1900, 1, 1).unwrap())
                .unwrap();
        }
        wh
    }

    fn treatments_mapping() -> SourceMapping {
        Mapping::parse(crate::reference_mapping_text())
            .unwrap()
            .source_for_stem("treatments")
            .unwrap()
            .clone()
    }

    fn record_with_cost(line: u64, cancer: &str, cost: &str) -> StagingRecord {
        let fields: BTreeMap<String, String> = [
            ("patientNo", "P0001"),
            ("cancerName", cancer),
            ("procName", "Chemotherapy"),
            ("treatDate", "01/06/2011"),
            ("cost", cost),
            ("deaths", "0"),
            ("patients", "1"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        StagingRecord {
            source_id: "treatments".into(),
            fields,
            lineage: Lineage { file: "treatments.csv".into(), line },
        }
    }

    fn record(line: u64, cancer: &str) -> StagingRecord {
        record_with_cost(line, cancer, "100.00")
    }

    #[test]
    fn vocabulary_holds_keys_variants_and_text_values() {
        let wh = warehouse_with_cancers();
        let vocab = reference_vocabulary(&wh, "DimCancerType");
        for expected in ["C91", "Leukemia", "Leukaemia", "Blood", "Skin"] {
            assert!(vocab.contains(&expected.to_string()), "missing {expected}");
        }
        let mut sorted = vocab.clone();
        sorted.sort();
        assert_eq!(vocab, sorted);
    }

    #[test]
    fn typo_is_corrected_and_logged() {
        let wh = warehouse_with_cancers();
        let sm = treatments_mapping();
        let (kept, actions) = cleanse(vec![record(2, "Leukemai")], &wh, &sm, 0.8);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].fields["cancerName"], "Leukemia");
        let corrected: Vec<_> = actions
            .iter()
            .filter(|a| a.kind == ActionKind::Corrected)
            .collect();
        assert_eq!(corrected.len(), 1);
        assert_eq!(corrected[0].original, "Leukemai");
        assert_eq!(corrected[0].corrected, "Leukemia");
        assert_eq!(corrected[0].similarity, 0.875);
    }

    #[test]
    fn unmatched_value_rejects_the_record() {
        let wh = warehouse_with_cancers();
        let sm = treatments_mapping();
        let (kept, actions) = cleanse(vec![record(2, "XYZQ")], &wh, &sm, 0.8);
        assert!(kept.is_empty());
        assert_eq!(actions.len(), 1);
        assert_eq!(actions[0].kind, ActionKind::Rejected);
        assert_eq!(actions[0].field, "cancerName");
    }

    #[test]
    fn exact_duplicates_collapse_to_one() {
        let wh = warehouse_with_cancers();
        let sm = treatments_mapping();
        let (kept, actions) = cleanse(vec![record(2, "Leukemia"), record(3, "Leukemia")], &wh, &sm, 0.8);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].lineage.line, 2); // first occurrence survives
        let dedup: Vec<_> = actions
            .iter()
            .filter(|a| a.kind == ActionKind::Deduplicated)
            .collect();
        assert_eq!(dedup.len(), 1);
        assert_eq!(dedup[0].lineage.line, 3);
    }

    #[test]
    fn corrected_copies_also_deduplicate() {
        let wh = warehouse_with_cancers();
        let sm = treatments_mapping();
        let (kept, actions) =
            cleanse(vec![record(2, "Leukemai"), record(3, "Leukemia")], &wh, &sm, 0.8);
        // after correction both records are identical
        assert_eq!(kept.len(), 1);
        assert_eq!(
            actions.iter().filter(|a| a.kind == ActionKind::Deduplicated).count(),
            1
        );
    }

    #[test]
    fn every_record_gets_exactly_one_disposition() {
        let wh = warehouse_with_cancers();
        let sm = treatments_mapping();
        let input = vec![
            record_with_cost(2, "Leukemia", "100.00"),
            record_with_cost(3, "Leukemai", "250.00"),
            record_with_cost(4, "XYZQ", "40.00"),
            record_with_cost(5, "Leukemia", "100.00"), // exact dup of line 2
        ];
        let (kept, actions) = cleanse(input, &wh, &sm, 0.8);
        let rejected = actions.iter().filter(|a| a.kind == ActionKind::Rejected).count();
        let deduplicated = actions.iter().filter(|a| a.kind == ActionKind::Deduplicated).count();
        let passed = actions.iter().filter(|a| a.kind == ActionKind::Passed).count();
        let corrected_records: BTreeSet<u64> = actions
            .iter()
            .filter(|a| a.kind == ActionKind::Corrected)
            .map(|a| a.lineage.line)
            .collect();
        assert_eq!(kept.len(), 2); // lines 2 and 3 survive
        assert_eq!(rejected, 1);
        assert_eq!(deduplicated, 1);
        // one disposition per record: passed(2) is line 2, corrected line 3,
        // rejected line 4, deduplicated line 5
        assert_eq!(passed + corrected_records.len() + rejected + deduplicated, 4);
    }
}
