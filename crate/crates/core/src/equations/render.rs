use serde_json::{json, Value};

use super::{PdeRow, PdeSystem, RowKind};
use crate::symexpr::{parse_with, Expr};
use crate::{Error, Result};

fn label(r: &PdeRow) -> String {
    let idx: Vec<String> = r.index.iter().map(|i| i.to_string()).collect();
    format!("{}[{}]", r.kind.name(), idx.join(","))
}

fn rhs_text(r: &PdeRow) -> String {
    let mut s = r.rhs.to_string();
    for ((a_idx, a), c) in &r.multipliers {
        s.push_str(&format!(" + mult[{a_idx},{a}]*({c})"));
    }
    s
}

pub(super) fn to_text(sys: &PdeSystem) -> String {
    let mut out = String::new();
    for r in &sys.rows {
        out.push_str(&format!("{}: {} = {}\n", label(r), r.lhs, rhs_text(r)));
    }
    out
}

pub(super) fn to_tree(sys: &PdeSystem) -> Value {
    let rows: Vec<Value> = sys
        .rows
        .iter()
        .map(|r| {
            let mults: Vec<Value> = r
                .multipliers
                .iter()
                .map(|((a_idx, a), c)| json!({ "multiplier": [a_idx, a], "coefficient": c.to_string() }))
                .collect();
            json!({
                "kind": r.kind.name(),
                "index": r.index,
                "lhs": r.lhs.to_string(),
                "rhs": r.rhs.to_string(),
                "multipliers": mults,
            })
        })
        .collect();
    json!({ "system": sys.kind.name(), "n": sys.n, "k": sys.k, "rows": rows })
}

/// `(kind, index, lhs, rhs)`; multiplier terms are folded into `rhs`.
pub type ParsedRow = (RowKind, Vec<usize>, Expr, Expr);

/// Parses the text rendering back into rows.
pub fn parse_system_text(text: &str, n: usize, k: usize) -> Result<Vec<ParsedRow>> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |msg: &str| Error::Parse { offset: line_no, msg: format!("line {}: {msg}", line_no + 1) };
        let (head, body) = line.split_once(": ").ok_or_else(|| bad("missing `: `"))?;
        let (kind, idx) = head.split_once('[').ok_or_else(|| bad("missing row index"))?;
        let kind = RowKind::from_name(kind).ok_or_else(|| bad("unknown row kind"))?;
        let index = idx
            .trim_end_matches(']')
            .split(',')
            .map(|s| s.parse::<usize>().map_err(|_| bad("bad row index")))
            .collect::<Result<Vec<_>>>()?;
        let (lhs, rhs) = body.split_once(" = ").ok_or_else(|| bad("missing ` = `"))?;
        out.push((kind, index, parse_with(lhs, n, k)?, parse_with(rhs, n, k)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::{derive_implicit_el, ConstraintSet};
    use crate::mechanics::LagrangianProblem;

    #[test]
    fn text_round_trips_with_multipliers() {
        let items = vec![("v[1,1]+c*v[2,1]".to_string(), vec!["dq[1]+c*dq[2]".to_string()])];
        let p = LagrangianProblem::parse(2, 1, "v[1,1]^2/2+v[2,1]^2/2")
            .unwrap()
            .with_param("c", 2.0)
            .with_constraints(ConstraintSet::parse(2, 1, &items).unwrap())
            .unwrap();
        let sys = crate::equations::derive_nh_implicit_el(&p).unwrap();
        let text = sys.to_text();
        let parsed = parse_system_text(&text, 2, 1).unwrap();
        assert_eq!(parsed.len(), sys.rows.len());
        for ((kind, index, lhs, rhs), r) in parsed.iter().zip(&sys.rows) {
            assert_eq!((*kind, index), (r.kind, &r.index));
            let back = PdeRow::new(*kind, index.clone(), lhs.clone(), rhs.clone());
            assert!(crate::symexpr::equivalent(&back.residual(), &r.residual()).unwrap().equal);
        }
    }

    #[test]
    fn tree_lists_every_row() {
        let p = LagrangianProblem::parse(1, 2, "v[1,1]^2/2-v[1,2]^2/2").unwrap();
        let tree = derive_implicit_el(&p).to_tree();
        assert_eq!(tree["system"], "implicit-el");
        assert_eq!(tree["rows"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_system_text("balance 1: phi[1] = 0", 1, 1).is_err());
        assert!(parse_system_text("bogus[1]: phi[1] = 0", 1, 1).is_err());
        assert!(parse_system_text("balance[1]: phi[1]", 1, 1).is_err());
    }
}
