//! Typed attribute values.
//!
//! Every dimension attribute carries one of four kinds. A `Value` is always
//! finite (NaN and infinities are rejected at construction), which lets the
//! warehouse give values total equality and hashing.

use std::fmt;

use thiserror::Error;

use crate::date::{Date, DateError};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum AttributeKind {
    Text,
    Integer,
    Decimal,
    Date,
}

impl AttributeKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttributeKind::Text => "text",
            AttributeKind::Integer => "integer",
            AttributeKind::Decimal => "decimal",
            AttributeKind::Date => "date",
        }
    }

    pub fn parse_name(s: &str) -> Option<AttributeKind> {
        match s {
            "text" => Some(AttributeKind::Text),
            "integer" => Some(AttributeKind::Integer),
            "decimal" => Some(AttributeKind::Decimal),
            "date" => Some(AttributeKind::Date),
            _ => None,
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ValueError {
    #[error("cannot parse {text:?} as {kind}")]
    Parse { kind: AttributeKind, text: String },
    #[error("non-finite decimal value")]
    NonFinite,
    #[error(transparent)]
    Date(#[from] DateError),
}

#[derive(Clone, Debug)]
pub enum Value {
    Text(String),
    Integer(i64),
    Decimal(f64),
    Date(Date),
}

impl Value {
    pub fn decimal(v: f64) -> Result<Value, ValueError> {
        if v.is_finite() {
            Ok(Value::Decimal(v))
        } else {
            Err(ValueError::NonFinite)
        }
    }

    /// Parse `text` as a value of `kind`. Text is taken verbatim; the other
    /// kinds are parsed from the trimmed text.
    pub fn parse(kind: AttributeKind, text: &str) -> Result<Value, ValueError> {
        let err = || ValueError::Parse {
            kind,
            text: text.to_string(),
        };
        match kind {
            AttributeKind::Text => Ok(Value::Text(text.to_string())),
            AttributeKind::Integer => text
                .trim()
                .parse::<i64>()
                .map(Value::Integer)
                .map_err(|_| err()),
            AttributeKind::Decimal => {
                let v: f64 = text.trim().parse().map_err(|_| err())?;
                Value::decimal(v).map_err(|_| err())
            }
            AttributeKind::Date => Ok(Value::Date(Date::parse_iso(text.trim()).map_err(|_| err())?)),
        }
    }

    pub fn kind(&self) -> AttributeKind {
        match self {
            Value::Text(_) => AttributeKind::Text,
            Value::Integer(_) => AttributeKind::Integer,
            Value::Decimal(_) => AttributeKind::Decimal,
            Value::Date(_) => AttributeKind::Date,
        }
    }

    /// Canonical text rendering: the form `parse` accepts back unchanged.
    pub fn render(&self) -> String {
        self.to_string()
    }

    fn decimal_bits(v: f64) -> u64 {
        // normalize -0.0 so equal-looking values hash alike
        if v == 0.0 {
            0.0f64.to_bits()
        } else {
            v.to_bits()
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Integer(n) => write!(f, "{n}"),
            Value::Decimal(v) => write!(f, "{v}"),
            Value::Date(d) => write!(f, "{d}"),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Text(a), Value::Text(b)) => a == b,
            (Value::Integer(a), Value::Integer(b)) => a == b,
            (Value::Decimal(a), Value::Decimal(b)) => {
                Value::decimal_bits(*a) == Value::decimal_bits(*b)
            }
            (Value::Date(a), Value::Date(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl std::hash::Hash for Value {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Text(s) => s.hash(state),
            Value::Integer(n) => n.hash(state),
            Value::Decimal(v) => Value::decimal_bits(*v).hash(state),
            Value::Date(d) => d.hash(state),
        }
    }
}

/// Ordering used when sorting axis members: numeric for numeric kinds,
/// chronological for dates, lexicographic for text. Mixed kinds fall back to
/// a stable kind-then-text order.
pub fn member_sort(values: &mut [String], kind: AttributeKind) {
    match kind {
        AttributeKind::Integer => {
            values.sort_by(|a, b| match (a.parse::<i64>(), b.parse::<i64>()) {
                (Ok(x), Ok(y)) => x.cmp(&y),
                _ => a.cmp(b),
            })
        }
        AttributeKind::Decimal => values.sort_by(|a, b| {
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => x.total_cmp(&y),
                _ => a.cmp(b),
            }
        }),
        // ISO date text sorts chronologically
        AttributeKind::Text | AttributeKind::Date => values.sort(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_render_round_trip() {
        let cases = [
            (AttributeKind::Text, "Leukemia"),
            (AttributeKind::Integer, "42"),
            (AttributeKind::Decimal, "1500.25"),
            (AttributeKind::Date, "2011-06-01"),
        ];
        for (kind, text) in cases {
            let v = Value::parse(kind, text).unwrap();
            assert_eq!(v.render(), text);
            assert_eq!(Value::parse(kind, &v.render()).unwrap(), v);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Value::parse(AttributeKind::Integer, "12.5").is_err());
        assert!(Value::parse(AttributeKind::Decimal, "NaN").is_err());
        assert!(Value::parse(AttributeKind::Date, "2011-02-31").is_err());
        assert!(Value::decimal(f64::INFINITY).is_err());
    }

    #[test]
    fn decimal_equality_normalizes_zero() {
        assert_eq!(Value::Decimal(0.0), Value::Decimal(-0.0));
    }

    #[test]
    fn member_sort_is_kind_aware() {
        let mut v = vec!["10".to_string(), "2".to_string(), "1".to_string()];
        member_sort(&mut v, AttributeKind::Integer);
        assert_eq!(v, ["1", "2", "10"]);
        let mut t = vec!["10".to_string(), "2".to_string()];
        member_sort(&mut t, AttributeKind::Text);
        assert_eq!(t, ["10", "2"]);
    }
}
