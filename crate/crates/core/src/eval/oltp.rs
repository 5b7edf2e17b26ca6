//! Normalized row-store emulation of the operational database.
//!
//! Four 3NF row tables (patients, cancer diagnoses, procedures, treatment
//! events) joined at query time by hash join built per execution — no
//! pre-aggregation and no memoization, so the comparison against the
//! warehouse path isolates layout and pre-aggregation effects. The emulation
//! is built from the warehouse's current rows, which guarantees both paths
//! answer over identical logical content.
//!
//! The row layout is fixed to the reference star schema.

use std::collections::{BTreeMap, HashMap};

use crate::cube::CubeResult;
use crate::date::Date;
use crate::store::Warehouse;

use super::queries::ComplexQuery;
use super::EvalError;

#[derive(Clone, Debug)]
pub struct PatientRec {
    pub patient_no: String,
    pub name: String,
    pub sex: String,
    pub birth_date: String,
    pub stage: String,
    pub phase: String,
}

#[derive(Clone, Debug)]
pub struct CancerRec {
    pub code: String,
    pub name: String,
    pub organ: String,
}

#[derive(Clone, Debug)]
pub struct ProcedureRec {
    pub code: String,
    pub name: String,
    pub kind: String,
}

#[derive(Clone, Debug)]
pub struct TreatmentRec {
    pub patient_no: String,
    pub cancer_code: String,
    pub proc_code: String,
    pub date: Date,
    pub cost: f64,
    pub deaths: f64,
    pub patients: f64,
}

#[derive(Clone, Debug, Default)]
pub struct OltpEmulation {
    pub patients: Vec<PatientRec>,
    pub cancer_types: Vec<CancerRec>,
    pub procedures: Vec<ProcedureRec>,
    pub treatments: Vec<TreatmentRec>,
}

/// Build the row-store from a loaded warehouse (current dimension rows,
/// every fact denormalized back to natural keys).
pub fn build_oltp_emulation(wh: &Warehouse) -> Result<OltpEmulation, EvalError> {
    let mut out = OltpEmulation::default();
    let attr = |attrs: &BTreeMap<String, crate::value::Value>, name: &str| attrs[name].render();

    for row in wh.dimension_rows("DimPatient")? {
        if row.validity.is_open() {
            out.patients.push(PatientRec {
                patient_no: row.natural_key.clone(),
                name: attr(&row.attributes, "name"),
                sex: attr(&row.attributes, "sex"),
                birth_date: attr(&row.attributes, "birthDate"),
                stage: attr(&row.attributes, "stage"),
                phase: attr(&row.attributes, "phase"),
            });
        }
    }
    for row in wh.dimension_rows("DimCancerType")? {
        if row.validity.is_open() {
            out.cancer_types.push(CancerRec {
                code: row.natural_key.clone(),
                name: attr(&row.attributes, "cancerName"),
                organ: attr(&row.attributes, "organ"),
            });
        }
    }
    for row in wh.dimension_rows("DimProcedure")? {
        if row.validity.is_open() {
            out.procedures.push(ProcedureRec {
                code: row.natural_key.clone(),
                name: attr(&row.attributes, "procName"),
                kind: attr(&row.attributes, "kind"),
            });
        }
    }

    for i in 0..wh.fact_count() {
        let fact = wh.fact_row(i);
        let natural = |dim: &str| -> Result<String, EvalError> {
            let key = fact.dim_keys[dim].value();
            Ok(wh
                .dimension_row_by_key(dim, key)?
                .expect("facts reference stored rows")
                .natural_key
                .clone())
        };
        let date_key: u32 = natural("DimDate")?
            .parse()
            .expect("date keys are yyyymmdd integers");
        out.treatments.push(TreatmentRec {
            patient_no: natural("DimPatient")?,
            cancer_code: natural("DimCancerType")?,
            proc_code: natural("DimProcedure")?,
            date: Date::from_yyyymmdd(date_key).expect("stored keys are valid dates"),
            cost: fact.measures["cost"],
            deaths: fact.measures["deaths"],
            patients: fact.measures["patients"],
        });
    }

    // referential integrity: every event joins
    {
        let p: HashMap<&str, ()> = out.patients.iter().map(|r| (r.patient_no.as_str(), ())).collect();
        let c: HashMap<&str, ()> = out.cancer_types.iter().map(|r| (r.code.as_str(), ())).collect();
        let pr: HashMap<&str, ()> = out.procedures.iter().map(|r| (r.code.as_str(), ())).collect();
        for t in &out.treatments {
            if !p.contains_key(t.patient_no.as_str())
                || !c.contains_key(t.cancer_code.as_str())
                || !pr.contains_key(t.proc_code.as_str())
            {
                return Err(EvalError::InvalidSpec(
                    "row-store referential integrity violated".to_string(),
                ));
            }
        }
    }
    Ok(out)
}

impl OltpEmulation {
    /// Execute a complex query row-at-a-time: build hash joins, filter,
    /// group, then evaluate measures. Everything is rebuilt per call.
    pub fn execute(&self, query: &ComplexQuery) -> BTreeMap<Vec<String>, BTreeMap<String, f64>> {
        let patients: HashMap<&str, &PatientRec> =
            self.patients.iter().map(|r| (r.patient_no.as_str(), r)).collect();
        let cancers: HashMap<&str, &CancerRec> =
            self.cancer_types.iter().map(|r| (r.code.as_str(), r)).collect();
        let procedures: HashMap<&str, &ProcedureRec> =
            self.procedures.iter().map(|r| (r.code.as_str(), r)).collect();

        let attr_of = |t: &TreatmentRec, dim: &str, attr: &str| -> String {
            match dim {
                "DimPatient" => {
                    let p = patients[t.patient_no.as_str()];
                    match attr {
                        "patientNo" => p.patient_no.clone(),
                        "name" => p.name.clone(),
                        "sex" => p.sex.clone(),
                        "birthDate" => p.birth_date.clone(),
                        "stage" => p.stage.clone(),
                        "phase" => p.phase.clone(),
                        other => unreachable!("no patient attribute {other}"),
                    }
                }
                "DimCancerType" => {
                    let c = cancers[t.cancer_code.as_str()];
                    match attr {
                        "cancerCode" => c.code.clone(),
                        "cancerName" => c.name.clone(),
                        "organ" => c.organ.clone(),
                        other => unreachable!("no cancer attribute {other}"),
                    }
                }
                "DimProcedure" => {
                    let p = procedures[t.proc_code.as_str()];
                    match attr {
                        "procCode" => p.code.clone(),
                        "procName" => p.name.clone(),
                        "kind" => p.kind.clone(),
                        other => unreachable!("no procedure attribute {other}"),
                    }
                }
                "DimDate" => match attr {
                    "dateKey" => t.date.yyyymmdd().to_string(),
                    "day" => t.date.day().to_string(),
                    "month" => t.date.month().to_string(),
                    "quarter" => t.date.quarter().to_string(),
                    "year" => t.date.year().to_string(),
                    other => unreachable!("no date attribute {other}"),
                },
                other => unreachable!("unknown dimension {other}"),
            }
        };

        #[derive(Default)]
        struct Acc {
            cost: f64,
            deaths: f64,
            patients: f64,
            count: u64,
        }
        let mut groups: HashMap<Vec<String>, Acc> = HashMap::new();
        'rows: for t in &self.treatments {
            for (dim, attr, wanted) in query.slicers {
                if attr_of(t, dim, attr) != *wanted {
                    continue 'rows;
                }
            }
            let key: Vec<String> = query
                .axes
                .iter()
                .map(|(dim, attr)| attr_of(t, dim, attr))
                .collect();
            let acc = groups.entry(key).or_default();
            acc.cost += t.cost;
            acc.deaths += t.deaths;
            acc.patients += t.patients;
            acc.count += 1;
        }

        let mut cells = BTreeMap::new();
        for (key, acc) in groups {
            let mut measures = BTreeMap::new();
            for m in query.measures {
                let value = match *m {
                    "cost" => Some(acc.cost),
                    "deaths" => Some(acc.deaths),
                    "patients" => Some(acc.patients),
                    "deathRate" => (acc.patients != 0.0).then(|| acc.deaths / acc.patients),
                    other => unreachable!("unknown measure {other}"),
                };
                if let Some(v) = value {
                    measures.insert(m.to_string(), v);
                }
            }
            cells.insert(key, measures);
        }
        cells
    }
}

/// Compare cube cells against row-store cells within a relative tolerance.
pub fn cells_match(
    cube: &CubeResult,
    oltp: &BTreeMap<Vec<String>, BTreeMap<String, f64>>,
    tolerance: f64,
) -> Result<(), String> {
    if cube.cells.len() != oltp.len() {
        return Err(format!(
            "coordinate counts differ: warehouse {} vs row-store {}",
            cube.cells.len(),
            oltp.len()
        ));
    }
    for (coord, cube_cell) in &cube.cells {
        let Some(oltp_cell) = oltp.get(coord) else {
            return Err(format!("coordinate {coord:?} missing from the row-store result"));
        };
        if cube_cell.len() != oltp_cell.len() {
            return Err(format!("measure sets differ at {coord:?}"));
        }
        for (measure, a) in cube_cell {
            let Some(b) = oltp_cell.get(measure) else {
                return Err(format!("measure {measure:?} missing at {coord:?}"));
            };
            let scale = 1.0f64.max(a.abs()).max(b.abs());
            if (a - b).abs() > tolerance * scale {
                return Err(format!(
                    "{measure:?} differs at {coord:?}: warehouse {a} vs row-store {b}"
                ));
            }
        }
    }
    Ok(())
}
