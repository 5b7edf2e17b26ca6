//! An embedded dimensional warehouse engine for cancer-care analytics.
//!
//! The crate is organized around the three classic warehouse areas:
//!
//! - **data acquisition** — [`etl`]: staged extraction from delimited source
//!   exports, fuzzy-lookup cleansing (typo correction and deduplication) and
//!   conforming transforms, loaded through an audited pipeline;
//! - **data storage** — [`schema`], [`store`] and [`cube`]: star-schema
//!   metadata, an append-only warehouse with surrogate keys and SCD2
//!   validity intervals, and lazy OLAP aggregation with drill-down/roll-up;
//! - **information delivery** — [`mdx`]: an MDX-subset parser and executor
//!   producing tabular grids (rendered by the CLI crate).
//!
//! [`eval`] turns the warehouse's design goals into executable checks: eight
//! pass/fail criteria over a synthetic dataset plus a response-time
//! comparison between the warehouse path and a normalized row-store
//! emulation of the operational database.

pub mod cube;
pub mod date;
pub mod etl;
pub mod mdx;
pub mod schema;
pub mod store;
mod textenc;
pub mod value;

pub use cube::{CubeAxis, CubeEngine, CubeError, CubeResult, Slicer};
pub use date::{Date, DateError};
pub use etl::{
    extract, fuzzy_lookup, run_pipeline, similarity, CleansingAction, EtlError, LoadStats,
    LookupOutcome, Mapping, PipelineOptions, PipelineReport, StagingRecord,
};
pub use mdx::{execute_mdx, parse_mdx, print_mdx, MdxError, MdxQuery, ResultGrid};
pub use schema::{
    parse_schema, print_schema, validate_subject_orientation, AttributeDef, CrossRefMap,
    DimensionDef, FactDef, MeasureDef, MeasureKind, SchemaError, StarSchema, ValidationReport,
};
pub use store::{
    DimensionRow, FactRow, StoreError, SurrogateKey, ValidityInterval, Warehouse,
};
pub use value::{AttributeKind, Value, ValueError};

/// The reference cancer-treatment star schema shipped with the engine.
pub fn reference_schema_text() -> &'static str {
    include_str!("../assets/reference.star")
}

/// Column mapping for the synthetic source bundle produced by the dataset
/// generator.
pub fn reference_mapping_text() -> &'static str {
    include_str!("../assets/reference.map")
}
