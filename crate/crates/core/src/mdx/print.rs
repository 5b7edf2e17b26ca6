//! Canonical MDX rendering: uppercase keywords, explicit braces around
//! member lists, single set-function expressions printed bare. Parsing the
//! printed text reproduces the query structurally.

use super::{MdxQuery, MemberPath, SetExpr, SlicerExpr};

pub fn print_mdx(q: &MdxQuery) -> String {
    let mut out = String::from("SELECT ");
    out.push_str(&print_set(&q.columns));
    out.push_str(" ON COLUMNS");
    if let Some(rows) = &q.rows {
        out.push_str(", ");
        out.push_str(&print_set(rows));
        out.push_str(" ON ROWS");
    }
    out.push_str(" FROM [");
    out.push_str(&q.cube);
    out.push(']');
    if let Some(slicer) = &q.slicer {
        out.push_str(" WHERE (");
        let parts: Vec<String> = slicer
            .iter()
            .map(|e| match e {
                SlicerExpr::Member(p) => print_path(p),
                SlicerExpr::Measure(m) => print_measure(m),
            })
            .collect();
        out.push_str(&parts.join(", "));
        out.push(')');
    }
    out
}

fn print_set(set: &[SetExpr]) -> String {
    if let [only] = set {
        // single set-function expressions read naturally without braces
        if matches!(only, SetExpr::Members { .. } | SetExpr::Children(_)) {
            return print_expr(only);
        }
    }
    let parts: Vec<String> = set.iter().map(print_expr).collect();
    format!("{{{}}}", parts.join(", "))
}

fn print_expr(expr: &SetExpr) -> String {
    match expr {
        SetExpr::Member(p) => print_path(p),
        SetExpr::Members { dimension, level } => format!("[{dimension}].[{level}].Members"),
        SetExpr::Children(p) => format!("{}.Children", print_path(p)),
        SetExpr::Measure(m) => print_measure(m),
    }
}

fn print_path(p: &MemberPath) -> String {
    format!("[{}].[{}].[{}]", p.dimension, p.level, p.member)
}

fn print_measure(name: &str) -> String {
    format!("[Measures].[{name}]")
}

#[cfg(test)]
mod tests {
    use super::super::parse_mdx;
    use super::*;

    #[test]
    fn print_parse_round_trip() {
        let texts = [
            "SELECT {[Measures].[cost]} ON COLUMNS, [DimCancerType].[cancerName].Members \
             ON ROWS FROM [Treatment]",
            "select {[Measures].[cost], [Measures].[deathRate]} on columns from [FactTreatment] \
             where ([DimDate].[year].[2011], [DimProcedure].[kind].[Drug])",
            "SELECT [DimDate].[year].[2011].Children ON COLUMNS, \
             {[DimCancerType].[organ].[Blood]} ON ROWS FROM [F] WHERE ([Measures].[patients])",
        ];
        for text in texts {
            let q = parse_mdx(text).unwrap();
            let printed = print_mdx(&q);
            let reparsed = parse_mdx(&printed).unwrap();
            assert_eq!(q, reparsed, "round trip failed for {text}");
            // canonical printing is idempotent
            assert_eq!(printed, print_mdx(&reparsed));
        }
    }

    #[test]
    fn canonical_form_uppercases_keywords() {
        let q = parse_mdx("select {[Measures].[cost]} on columns from [T]").unwrap();
        let printed = print_mdx(&q);
        assert!(printed.starts_with("SELECT "));
        assert!(printed.contains(" ON COLUMNS"));
        assert!(printed.contains(" FROM [T]"));
    }
}
