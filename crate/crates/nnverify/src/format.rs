//! The `.pnet` problem format.
//!
//! ```text
//! Input <id>
//! Linear <id> <bias> (<weight> <src>)+
//! ReLU <id> <bias> (<weight> <src>)+
//! MaxPool <id> <src>+
//! Assert <= <c> (<coeff> <id>)+    # c ≤ Σ coeff·value(id)
//! Assert >= <c> (<coeff> <id>)+    # c ≥ Σ coeff·value(id)
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use nnverify_core::{LinearConstraint, NetworkBuilder, NodeKind, Relation, VerificationProblem};

use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn is_id(tok: &str) -> bool {
    !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

fn parse_id(line: usize, tok: &str) -> Result<String> {
    if is_id(tok) {
        Ok(tok.to_string())
    } else {
        Err(parse_err(line, format!("`{tok}` is not a valid id")))
    }
}

/// Parses a finite real number.
pub fn parse_real(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn real(line: usize, tok: &str) -> Result<f64> {
    parse_real(tok).ok_or_else(|| parse_err(line, format!("`{tok}` is not a finite number")))
}

fn pairs(line: usize, toks: &[&str]) -> Result<Vec<(f64, String)>> {
    if toks.is_empty() || !toks.len().is_multiple_of(2) {
        return Err(parse_err(line, "expected one or more `<number> <id>` pairs"));
    }
    toks.chunks(2).map(|p| Ok((real(line, p[0])?, parse_id(line, p[1])?))).collect()
}

struct Decl {
    line: usize,
    name: String,
    kind: NodeKind,
    bias: f64,
    preds: Vec<(f64, String)>,
}

struct Assert {
    line: usize,
    relation: Relation,
    rhs: f64,
    terms: Vec<(f64, String)>,
}

/// Parses and validates a `.pnet` problem.
pub fn parse_problem(text: &str) -> Result<VerificationProblem> {
    let mut decls: Vec<Decl> = Vec::new();
    let mut asserts: Vec<Assert> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        let Some(&head) = toks.first() else { continue };
        let need = |n: usize| -> Result<()> {
            if toks.len() < n {
                Err(parse_err(line, format!("`{head}` needs at least {} operands", n - 1)))
            } else {
                Ok(())
            }
        };
        match head {
            "Input" => {
                if toks.len() != 2 {
                    return Err(parse_err(line, "`Input` takes exactly one id"));
                }
                let name = parse_id(line, toks[1])?;
                decls.push(Decl { line, name, kind: NodeKind::Input, bias: 0.0, preds: Vec::new() });
            }
            "Linear" | "ReLU" => {
                need(5)?;
                let kind = if head == "Linear" { NodeKind::Linear } else { NodeKind::Relu };
                let name = parse_id(line, toks[1])?;
                let bias = real(line, toks[2])?;
                let preds = pairs(line, &toks[3..])?;
                decls.push(Decl { line, name, kind, bias, preds });
            }
            "MaxPool" => {
                need(3)?;
                let name = parse_id(line, toks[1])?;
                let preds = toks[2..]
                    .iter()
                    .map(|t| parse_id(line, t).map(|s| (1.0, s)))
                    .collect::<Result<Vec<_>>>()?;
                decls.push(Decl { line, name, kind: NodeKind::MaxPool, bias: 0.0, preds });
            }
            "Assert" => {
                need(5)?;
                // `<= c` reads c ≤ Σ, i.e. Σ ≥ c.
                let relation = match toks[1] {
                    "<=" => Relation::AtLeast,
                    ">=" => Relation::AtMost,
                    other => return Err(parse_err(line, format!("unknown relation `{other}`"))),
                };
                let rhs = real(line, toks[2])?;
                let terms = pairs(line, &toks[3..])?;
                asserts.push(Assert { line, relation, rhs, terms });
            }
            other => return Err(parse_err(line, format!("unknown keyword `{other}`"))),
        }
    }

    let mut decl_line: HashMap<&str, usize> = HashMap::new();
    for d in &decls {
        if decl_line.insert(d.name.as_str(), d.line).is_some() {
            return Err(Error::DuplicateId { line: d.line, name: d.name.clone() });
        }
    }
    for d in &decls {
        let mut seen = HashSet::new();
        for (_, src) in &d.preds {
            if !decl_line.contains_key(src.as_str()) {
                return Err(Error::UnknownNode { line: d.line, name: src.clone() });
            }
            if !seen.insert(src.as_str()) {
                return Err(parse_err(d.line, format!("source `{src}` listed twice")));
            }
        }
    }

    let mut builder = NetworkBuilder::new();
    for d in &decls {
        let preds: Vec<(f64, &str)> = d.preds.iter().map(|(w, s)| (*w, s.as_str())).collect();
        match d.kind {
            NodeKind::Input => builder.input(&d.name),
            NodeKind::Linear => builder.linear(&d.name, d.bias, &preds),
            NodeKind::Relu => builder.relu(&d.name, d.bias, &preds),
            NodeKind::MaxPool => {
                let srcs: Vec<&str> = preds.iter().map(|&(_, s)| s).collect();
                builder.maxpool(&d.name, &srcs)
            }
        };
    }
    let line_of = |name: &str| decl_line.get(name).copied().unwrap_or(0);
    let net = builder.build().map_err(|e| match e {
        nnverify_core::Error::Cycle(n) => Error::Cycle(n),
        nnverify_core::Error::NotTopological(n) => parse_err(line_of(&n), format!("`{n}` is declared after use")),
        nnverify_core::Error::InvalidNode { node, reason } => parse_err(line_of(&node), reason),
        other => Error::Engine(other),
    })?;

    let mut property = Vec::with_capacity(asserts.len());
    for a in &asserts {
        let mut terms = Vec::with_capacity(a.terms.len());
        for (coeff, name) in &a.terms {
            let id = net.find(name).ok_or_else(|| Error::UnknownNode { line: a.line, name: name.clone() })?;
            if terms.iter().any(|&(_, other)| other == id) {
                return Err(parse_err(a.line, format!("`{name}` appears twice in one constraint")));
            }
            terms.push((*coeff, id));
        }
        property.push(LinearConstraint { terms, relation: a.relation, rhs: a.rhs });
    }
    VerificationProblem::new(net, property).map_err(|e| match e {
        nnverify_core::Error::UnboundedInput(n) => Error::UnboundedInput(n),
        other => Error::Engine(other),
    })
}

/// Writes `problem` back as `.pnet` text; parsing the result yields an
/// equal problem.
pub fn write_problem(problem: &VerificationProblem) -> String {
    let net = problem.network();
    let mut out = String::new();
    for node in net.nodes() {
        let _ = match node.kind {
            NodeKind::Input => write!(out, "Input {}", node.name),
            NodeKind::Linear => write!(out, "Linear {} {:?}", node.name, node.bias),
            NodeKind::Relu => write!(out, "ReLU {} {:?}", node.name, node.bias),
            NodeKind::MaxPool => write!(out, "MaxPool {}", node.name),
        };
        for &(src, w) in &node.preds {
            let _ = if node.kind == NodeKind::MaxPool {
                write!(out, " {}", net.name(src))
            } else {
                write!(out, " {:?} {}", w, net.name(src))
            };
        }
        out.push('\n');
    }
    for c in problem.property() {
        let op = match c.relation {
            Relation::AtLeast => "<=",
            Relation::AtMost => ">=",
        };
        let _ = write!(out, "Assert {op} {:?}", c.rhs);
        for &(coeff, id) in &c.terms {
            let _ = write!(out, " {:?} {}", coeff, net.name(id));
        }
        out.push('\n');
    }
    out
}

/// Parses a vector of reals separated by commas and/or whitespace.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            parse_real(t).ok_or_else(|| Error::Query(format!("entry {} (`{t}`) is not a finite number", i + 1)))
        })
        .collect()
}
