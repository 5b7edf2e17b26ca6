//! Recursive-descent parser for the MDX subset.

use super::lex::{lex, syntax_error, Spanned, Tok};
use super::{MdxError, MdxQuery, MemberPath, SetExpr, SlicerExpr};

pub fn parse_mdx(text: &str) -> Result<MdxQuery, MdxError> {
    let toks = lex(text)?;
    let mut p = Parser { text, toks, pos: 0 };
    let query = p.query()?;
    if let Some(t) = p.peek() {
        return Err(p.err_at(t.offset, "trailing input after the query"));
    }
    Ok(query)
}

struct Parser<'t> {
    text: &'t str,
    toks: Vec<Spanned>,
    pos: usize,
}

impl<'t> Parser<'t> {
    fn query(&mut self) -> Result<MdxQuery, MdxError> {
        self.expect_keyword("SELECT")?;
        let mut columns: Option<Vec<SetExpr>> = None;
        let mut rows: Option<Vec<SetExpr>> = None;
        loop {
            let set = self.set()?;
            self.expect_keyword("ON")?;
            let axis_offset = self.peek().map(|t| t.offset).unwrap_or(self.text.len());
            let axis = self.word()?;
            match axis.to_ascii_uppercase().as_str() {
                "COLUMNS" => {
                    if columns.replace(set).is_some() {
                        return Err(MdxError::DuplicateAxis("COLUMNS".to_string()));
                    }
                }
                "ROWS" => {
                    if rows.replace(set).is_some() {
                        return Err(MdxError::DuplicateAxis("ROWS".to_string()));
                    }
                }
                other => {
                    return Err(self.err_at(axis_offset, format!("unknown axis {other:?}")))
                }
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect_keyword("FROM")?;
        let cube = self.ident()?;
        let slicer = if self.at_keyword("WHERE") {
            self.bump();
            Some(self.tuple()?)
        } else {
            None
        };
        let columns = columns.ok_or(MdxError::MissingColumnsAxis)?;
        Ok(MdxQuery { columns, rows, cube, slicer })
    }

    fn set(&mut self) -> Result<Vec<SetExpr>, MdxError> {
        if self.eat(&Tok::LBrace) {
            let mut exprs = Vec::new();
            if self.eat(&Tok::RBrace) {
                return Err(MdxError::EmptySet);
            }
            loop {
                exprs.push(self.expr()?);
                if self.eat(&Tok::RBrace) {
                    break;
                }
                self.expect(&Tok::Comma, "expected `,` or `}` in a set")?;
            }
            Ok(exprs)
        } else {
            Ok(vec![self.expr()?])
        }
    }

    fn tuple(&mut self) -> Result<Vec<SlicerExpr>, MdxError> {
        self.expect(&Tok::LParen, "expected `(` after WHERE")?;
        let mut exprs = Vec::new();
        loop {
            let offset = self.peek().map(|t| t.offset).unwrap_or(self.text.len());
            let expr = match self.expr()? {
                SetExpr::Member(path) => SlicerExpr::Member(path),
                SetExpr::Measure(name) => SlicerExpr::Measure(name),
                _ => {
                    return Err(self.err_at(
                        offset,
                        "slicer tuples take explicit member paths or measures",
                    ))
                }
            };
            exprs.push(expr);
            if self.eat(&Tok::RParen) {
                break;
            }
            self.expect(&Tok::Comma, "expected `,` or `)` in a tuple")?;
        }
        Ok(exprs)
    }

    /// One bracketed path with optional trailing `.Members` / `.Children`.
    fn expr(&mut self) -> Result<SetExpr, MdxError> {
        let start = self.peek().map(|t| t.offset).unwrap_or(self.text.len());
        let mut segments: Vec<String> = vec![self.ident()?];
        let mut function: Option<String> = None;
        while self.eat(&Tok::Dot) {
            match self.peek().map(|t| t.tok.clone()) {
                Some(Tok::Ident(s)) => {
                    self.bump();
                    segments.push(s);
                }
                Some(Tok::Word(w)) => {
                    self.bump();
                    match w.to_ascii_lowercase().as_str() {
                        "members" | "children" => {
                            function = Some(w.to_ascii_lowercase());
                            break;
                        }
                        other => {
                            return Err(self.err_at(
                                start,
                                format!("unknown member function {other:?}"),
                            ))
                        }
                    }
                }
                _ => return Err(self.err_here("expected `[identifier]` after `.`")),
            }
        }

        let is_measures = segments[0].eq_ignore_ascii_case("Measures");
        match (segments.len(), function.as_deref(), is_measures) {
            (2, None, true) => Ok(SetExpr::Measure(segments.swap_remove(1))),
            (3, None, false) => {
                let member = segments.pop().unwrap();
                let level = segments.pop().unwrap();
                let dimension = segments.pop().unwrap();
                Ok(SetExpr::Member(MemberPath { dimension, level, member }))
            }
            (2, Some("members"), false) => {
                let level = segments.pop().unwrap();
                let dimension = segments.pop().unwrap();
                Ok(SetExpr::Members { dimension, level })
            }
            (3, Some("children"), false) => {
                let member = segments.pop().unwrap();
                let level = segments.pop().unwrap();
                let dimension = segments.pop().unwrap();
                Ok(SetExpr::Children(MemberPath { dimension, level, member }))
            }
            _ => Err(self.err_at(
                start,
                "expected [Dim].[Level].[Member], [Dim].[Level].Members, \
                 [Dim].[Level].[Member].Children or [Measures].[name]",
            )),
        }
    }

    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) {
        self.pos += 1;
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|t| &t.tok) == Some(tok) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, msg: &str) -> Result<(), MdxError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.err_here(msg))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Spanned { tok: Tok::Word(w), .. }) if w.eq_ignore_ascii_case(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), MdxError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.err_here(&format!("expected keyword {kw}")))
        }
    }

    fn word(&mut self) -> Result<String, MdxError> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Word(w)) => {
                self.bump();
                Ok(w)
            }
            _ => Err(self.err_here("expected a keyword")),
        }
    }

    fn ident(&mut self) -> Result<String, MdxError> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Ident(s)) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.err_here("expected `[identifier]`")),
        }
    }

    fn err_here(&self, msg: &str) -> MdxError {
        let offset = self.peek().map(|t| t.offset).unwrap_or(self.text.len());
        self.err_at(offset, msg)
    }

    fn err_at(&self, offset: usize, msg: impl Into<String>) -> MdxError {
        syntax_error(self.text, offset, msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = "SELECT {[Measures].[cost]} ON COLUMNS, \
         [DimCancerType].[cancerName].Members ON ROWS FROM [Treatment]";

    #[test]
    fn parses_the_canonical_query() {
        let q = parse_mdx(CANONICAL).unwrap();
        assert_eq!(q.columns, vec![SetExpr::Measure("cost".to_string())]);
        assert_eq!(
            q.rows,
            Some(vec![SetExpr::Members {
                dimension: "DimCancerType".to_string(),
                level: "cancerName".to_string(),
            }])
        );
        assert_eq!(q.cube, "Treatment");
        assert!(q.slicer.is_none());
        assert_eq!(q.measures(), vec!["cost"]);
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let q = parse_mdx(
            "select {[Measures].[cost]} on columns from [Treatment] where ([DimDate].[year].[2011])",
        )
        .unwrap();
        assert_eq!(
            q.slicer,
            Some(vec![SlicerExpr::Member(MemberPath {
                dimension: "DimDate".to_string(),
                level: "year".to_string(),
                member: "2011".to_string(),
            })])
        );
    }

    #[test]
    fn duplicate_axis_is_an_error() {
        let text = "SELECT {[Measures].[cost]} ON COLUMNS, {[Measures].[deaths]} ON COLUMNS FROM [T]";
        assert!(matches!(parse_mdx(text), Err(MdxError::DuplicateAxis(_))));
    }

    #[test]
    fn garbage_errors_at_offset_zero() {
        match parse_mdx("SELEKT") {
            Err(MdxError::Syntax { offset: 0, .. }) => {}
            other => panic!("expected syntax error at offset 0, got {other:?}"),
        }
    }

    #[test]
    fn children_and_explicit_members_parse() {
        let q = parse_mdx(
            "SELECT {[DimDate].[year].[2011], [DimDate].[year].[2012]} ON COLUMNS, \
             [DimDate].[year].[2011].Children ON ROWS FROM [T]",
        )
        .unwrap();
        assert_eq!(q.columns.len(), 2);
        assert!(matches!(q.rows.as_deref(), Some([SetExpr::Children(_)])));
    }

    #[test]
    fn rows_only_is_rejected() {
        assert!(matches!(
            parse_mdx("SELECT {[Measures].[cost]} ON ROWS FROM [T]"),
            Err(MdxError::MissingColumnsAxis)
        ));
    }

    #[test]
    fn empty_set_and_bad_paths_are_rejected() {
        assert!(matches!(
            parse_mdx("SELECT {} ON COLUMNS FROM [T]"),
            Err(MdxError::EmptySet)
        ));
        assert!(parse_mdx("SELECT [OnlyDim] ON COLUMNS FROM [T]").is_err());
        assert!(parse_mdx("SELECT [A].[b].[c].[d] ON COLUMNS FROM [T]").is_err());
        assert!(parse_mdx("SELECT [A].[b].Parent ON COLUMNS FROM [T]").is_err());
    }
}
