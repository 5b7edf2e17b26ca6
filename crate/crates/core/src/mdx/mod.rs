//! An MDX subset: the query surface over the cube.
//!
//! Grammar (EBNF in `docs/mdx.md`):
//!
//! ```text
//! query  = SELECT set ON axis [ "," set ON axis ] FROM cube [ WHERE tuple ]
//! set    = "{" expr { "," expr } "}" | expr
//! expr   = "[" name "]" "." "[" name "]" "." "[" name "]"          (member)
//!        | "[" name "]" "." "[" name "]" ".Members"                 (level set)
//!        | "[" name "]" "." "[" name "]" "." "[" name "]" ".Children"
//!        | "[Measures]" "." "[" name "]"                            (measure)
//! tuple  = "(" expr { "," expr } ")"
//! axis   = COLUMNS | ROWS
//! ```
//!
//! Keywords are case-insensitive; bracket-quoted identifiers are verbatim
//! (any characters except `]`). Parsing and printing round-trip: printing a
//! query and parsing it back yields a structurally equal AST.

mod exec;
mod lex;
mod parse;
mod print;

use thiserror::Error;

use crate::cube::CubeError;
use crate::store::StoreError;

pub use exec::{execute_mdx, execute_with_engine};
pub(crate) use exec::{bind_query, BoundAxis, BoundQuery};
pub use parse::parse_mdx;
pub use print::print_mdx;

#[derive(Debug, Error)]
pub enum MdxError {
    #[error("syntax error at line {line}, column {col} (offset {offset}): {msg}")]
    Syntax { offset: usize, line: usize, col: usize, msg: String },
    #[error("duplicate {0} axis")]
    DuplicateAxis(String),
    #[error("a query needs a set ON COLUMNS")]
    MissingColumnsAxis,
    #[error("unknown cube {name:?} (the schema defines {fact:?})")]
    UnknownCube { name: String, fact: String },
    #[error("axis set mixes incompatible expressions: {0}")]
    MixedSet(String),
    #[error("duplicate member {0:?} on an axis")]
    DuplicateMember(String),
    #[error("the query selects no measures")]
    NoMeasures,
    #[error("measures must appear on exactly one axis or the slicer")]
    MeasuresOnMultipleAxes,
    #[error("empty axis set")]
    EmptySet,
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Offset of the syntax error, if this is one. The CLI uses it to render a
/// caret under the query text.
impl MdxError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            MdxError::Syntax { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}

/// Explicit member path `[Dim].[Level].[Member]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemberPath {
    pub dimension: String,
    pub level: String,
    pub member: String,
}

/// One element of an axis set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetExpr {
    Member(MemberPath),
    /// `[Dim].[Level].Members` — every member of the level.
    Members { dimension: String, level: String },
    /// `[Dim].[Level].[Member].Children` — members of the next finer level
    /// within the named member.
    Children(MemberPath),
    /// `[Measures].[name]`.
    Measure(String),
}

/// A slicer tuple element: an explicit member path or a measure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlicerExpr {
    Member(MemberPath),
    Measure(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MdxQuery {
    pub columns: Vec<SetExpr>,
    pub rows: Option<Vec<SetExpr>>,
    pub cube: String,
    pub slicer: Option<Vec<SlicerExpr>>,
}

impl MdxQuery {
    /// The measure selection, wherever it appears.
    pub fn measures(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for set in [Some(&self.columns), self.rows.as_ref()].into_iter().flatten() {
            for expr in set {
                if let SetExpr::Measure(name) = expr {
                    out.push(name.as_str());
                }
            }
        }
        if let Some(slicer) = &self.slicer {
            for expr in slicer {
                if let SlicerExpr::Measure(name) = expr {
                    out.push(name.as_str());
                }
            }
        }
        out
    }
}

/// Tabular query result. `None` cells are genuinely empty (no facts), kept
/// distinct from zero-valued measures.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultGrid {
    pub column_headers: Vec<String>,
    pub row_headers: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}
