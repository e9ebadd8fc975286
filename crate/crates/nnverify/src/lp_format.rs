//! Reader for the LP text written by [`nnverify_core::lp::export_lp`].

use std::collections::HashMap;

use nnverify_core::lp::{Cmp, LinearProgram, Row, VarId};

use crate::error::{Error, Result};

fn lp_err(line: usize, message: impl Into<String>) -> Error {
    Error::LpParse { line, message: message.into() }
}

fn number(line: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| lp_err(line, format!("`{tok}` is not a number")))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Start,
    Objective,
    Rows,
    Bounds,
    End,
}

struct Names {
    index: HashMap<String, usize>,
    order: Vec<(String, f64, f64)>,
}

impl Names {
    fn id(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.index.insert(name.to_string(), self.order.len());
        self.order.push((name.to_string(), 0.0, f64::INFINITY));
        self.order.len() - 1
    }
}

/// Signed `coef name` pairs. A lone unsigned `0 name` is the placeholder for
/// an empty expression.
fn terms(line: usize, toks: &[&str], names: &mut Names) -> Result<Vec<(usize, f64)>> {
    if toks.len() == 2 && toks[0] == "0" {
        names.id(toks[1]);
        return Ok(Vec::new());
    }
    if !toks.len().is_multiple_of(2) {
        return Err(lp_err(line, "expected `<coef> <var>` pairs"));
    }
    toks.chunks(2).map(|p| Ok((names.id(p[1]), number(line, p[0])?))).collect()
}

/// Parses LP text into a program with the same variables, rows and objective.
/// Variables are numbered in order of first appearance in the `Bounds`
/// section, then in the objective and rows.
pub fn read_lp(text: &str) -> Result<LinearProgram> {
    let mut bound_names = Names { index: HashMap::new(), order: Vec::new() };
    let mut objective_toks: Option<(usize, Vec<String>)> = None;
    let mut row_toks: Vec<(usize, Vec<String>, Cmp, f64)> = Vec::new();
    let mut section = Section::Start;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        match (toks.as_slice(), section) {
            (["Minimize"], Section::Start) => section = Section::Objective,
            (["Subject", "To"], Section::Objective) => section = Section::Rows,
            (["Bounds"], Section::Rows) => section = Section::Bounds,
            (["End"], Section::Bounds) => section = Section::End,
            ([label, rest @ ..], Section::Objective) if label.ends_with(':') => {
                objective_toks = Some((line, rest.iter().map(|s| s.to_string()).collect()));
            }
            ([label, rest @ ..], Section::Rows) if label.ends_with(':') && rest.len() >= 2 => {
                let (body, tail) = rest.split_at(rest.len() - 2);
                let cmp = match tail[0] {
                    "<=" => Cmp::Le,
                    ">=" => Cmp::Ge,
                    "=" => Cmp::Eq,
                    other => return Err(lp_err(line, format!("unknown comparison `{other}`"))),
                };
                row_toks.push((line, body.iter().map(|s| s.to_string()).collect(), cmp, number(line, tail[1])?));
            }
            (bound, Section::Bounds) => {
                let (name, lo, hi) = match *bound {
                    [v, "free"] => (v, f64::NEG_INFINITY, f64::INFINITY),
                    [v, "=", x] => (v, number(line, x)?, number(line, x)?),
                    [lo, "<=", v, "<=", hi] => (v, number(line, lo)?, number(line, hi)?),
                    [v, ">=", lo] => (v, number(line, lo)?, f64::INFINITY),
                    [v, "<=", hi] => (v, 0.0, number(line, hi)?),
                    _ => return Err(lp_err(line, "malformed bound")),
                };
                let id = bound_names.id(name);
                bound_names.order[id].1 = lo;
                bound_names.order[id].2 = hi;
            }
            _ => return Err(lp_err(line, format!("unexpected `{}`", raw.trim()))),
        }
    }
    if section != Section::End {
        return Err(lp_err(text.lines().count(), "missing `End`"));
    }

    let mut names = bound_names;
    let objective = match objective_toks {
        Some((line, toks)) => terms(line, &toks.iter().map(String::as_str).collect::<Vec<_>>(), &mut names)?,
        None => Vec::new(),
    };
    let mut rows = Vec::with_capacity(row_toks.len());
    for (line, toks, cmp, rhs) in &row_toks {
        let t = terms(*line, &toks.iter().map(String::as_str).collect::<Vec<_>>(), &mut names)?;
        rows.push(Row::new(t.into_iter().map(|(v, c)| (VarId(v), c)).collect(), *cmp, *rhs));
    }

    let mut lp = LinearProgram::new();
    for (name, lo, hi) in names.order {
        lp.add_var(name, lo, hi);
    }
    for row in rows {
        lp.add_row(row)?;
    }
    lp.set_objective(objective.into_iter().map(|(v, c)| (VarId(v), c)).collect());
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nnverify_core::lp::export_lp;

    #[test]
    fn reads_every_bound_form() {
        let text = "Minimize\n obj: +1 a -2 b\nSubject To\n c1: +1 a +1 b >= 3\n c2: -1 c = 0.5\nBounds\n a free\n b = 2\n 0 <= c <= 1\n d >= -1\n -inf <= e <= 4\nEnd\n";
        let lp = read_lp(text).unwrap();
        let bounds: Vec<(f64, f64)> = lp.vars().iter().map(|v| (v.lower, v.upper)).collect();
        assert_eq!(
            bounds,
            vec![
                (f64::NEG_INFINITY, f64::INFINITY),
                (2.0, 2.0),
                (0.0, 1.0),
                (-1.0, f64::INFINITY),
                (f64::NEG_INFINITY, 4.0)
            ]
        );
        assert_eq!(lp.rows().len(), 2);
        assert_eq!(export_lp(&lp), text);
    }

    #[test]
    fn placeholder_objective_is_empty() {
        let text = "Minimize\n obj: 0 x\nSubject To\nBounds\n x free\nEnd\n";
        let lp = read_lp(text).unwrap();
        assert!(lp.objective().is_empty());
        assert_eq!(export_lp(&lp), text);
    }

    #[test]
    fn missing_end_is_an_error() {
        assert!(read_lp("Minimize\n obj: 0 x\nSubject To\nBounds\n").is_err());
    }
}
