//! The golden complex queries raced by the benchmark.
//!
//! Each query carries at least three dimension filters, a two-level
//! group-by and a ratio measure, expressed once as cube parameters and
//! executed on the row-store through the generic evaluator.

#[derive(Clone, Copy, Debug)]
pub struct ComplexQuery {
    pub id: &'static str,
    pub description: &'static str,
    pub axes: &'static [(&'static str, &'static str)],
    pub slicers: &'static [(&'static str, &'static str, &'static str)],
    pub measures: &'static [&'static str],
}

pub const COMPLEX_QUERIES: &[ComplexQuery] = &[
    ComplexQuery {
        id: "Q1",
        description: "cost and death rate by cancer and quarter, blood cancers \
                      under drug procedures in 2011",
        axes: &[("DimCancerType", "cancerName"), ("DimDate", "quarter")],
        slicers: &[
            ("DimCancerType", "organ", "Blood"),
            ("DimProcedure", "kind", "Drug"),
            ("DimDate", "year", "2011"),
        ],
        measures: &["cost", "deathRate"],
    },
    ComplexQuery {
        id: "Q2",
        description: "patient volume and death rate by procedure and year, \
                      female blood-cancer patients in second quarters",
        axes: &[("DimProcedure", "procName"), ("DimDate", "year")],
        slicers: &[
            ("DimCancerType", "organ", "Blood"),
            ("DimPatient", "sex", "F"),
            ("DimDate", "quarter", "2"),
        ],
        measures: &["patients", "deathRate"],
    },
    ComplexQuery {
        id: "Q3",
        description: "cost and death rate by stage and cancer, drug procedures \
                      on blood cancers in 2012",
        axes: &[("DimPatient", "stage"), ("DimCancerType", "cancerName")],
        slicers: &[
            ("DimProcedure", "kind", "Drug"),
            ("DimDate", "year", "2012"),
            ("DimCancerType", "organ", "Blood"),
        ],
        measures: &["cost", "deathRate"],
    },
];

pub fn complex_query(id: &str) -> Option<&'static ComplexQuery> {
    COMPLEX_QUERIES.iter().find(|q| q.id == id)
}
