//! Exhaustive reference decision procedure.
//!
//! Enumerates every complete phase assignment. Under a fixed assignment each
//! node is an affine function of the inputs, so feasibility is a small LP
//! over the input variables alone: the box, the sign conditions of the chosen
//! ReLU phases, the MaxPool dominance conditions and the property.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Row, VarId};
use crate::network::{NodeKind, Relation, VerificationProblem};
use crate::relaxation::{Phase, PhaseFixture};

/// Largest number of complete fixtures the oracle will enumerate.
pub const ORACLE_CAP: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Input assignment satisfying the property, if any.
    pub witness: Option<Vec<f64>>,
    /// Complete fixtures examined before stopping.
    pub fixtures_enumerated: u128,
}

/// Coefficients over the inputs followed by a constant.
type Affine = Vec<f64>;

fn scaled_add(acc: &mut Affine, w: f64, x: &Affine) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += w * b;
    }
}

/// Input point realising `fixture` (which must be complete), or `None`.
pub fn oracle_fixture_witness(problem: &VerificationProblem, fixture: &PhaseFixture) -> Result<Option<Vec<f64>>> {
    let net = problem.network();
    let n_in = net.inputs().len();
    let mut lp = LinearProgram::new();
    for (i, &(lo, hi)) in problem.input_box().iter().enumerate() {
        lp.add_var(format!("x{i}"), lo, hi);
    }
    let mut forms: Vec<Affine> = Vec::with_capacity(net.len());
    let mut rows: Vec<Row> = Vec::new();
    // `form ≥ 0` as a row over the input variables.
    let nonneg = |f: &Affine| -> Row {
        let terms = (0..n_in).filter(|&i| f[i] != 0.0).map(|i| (VarId(i), f[i])).collect();
        Row::ge(terms, -f[n_in])
    };
    let mut input_idx = 0;
    for id in net.ids() {
        let node = net.node(id);
        let mut pre = vec![0.0; n_in + 1];
        let form = match node.kind {
            NodeKind::Input => {
                pre[input_idx] = 1.0;
                input_idx += 1;
                pre
            }
            NodeKind::Linear | NodeKind::Relu => {
                pre[n_in] = node.bias;
                for &(s, w) in &node.preds {
                    scaled_add(&mut pre, w, &forms[s.0]);
                }
                if node.kind == NodeKind::Linear {
                    pre
                } else {
                    match fixture.get(id) {
                        Some(Phase::Active) => {
                            rows.push(nonneg(&pre));
                            pre
                        }
                        Some(Phase::Inactive) => {
                            let neg: Affine = pre.iter().map(|x| -x).collect();
                            rows.push(nonneg(&neg));
                            vec![0.0; n_in + 1]
                        }
                        _ => return Err(Error::InvalidNode { node: node.name.clone(), reason: "fixture incomplete" }),
                    }
                }
            }
            NodeKind::MaxPool => {
                let e = match fixture.get(id) {
                    Some(Phase::Edge(e)) if e < node.preds.len() => e,
                    _ => return Err(Error::InvalidNode { node: node.name.clone(), reason: "fixture incomplete" }),
                };
                let chosen = forms[node.preds[e].0 .0].clone();
                for (i, &(s, _)) in node.preds.iter().enumerate() {
                    if i != e {
                        let mut diff = chosen.clone();
                        scaled_add(&mut diff, -1.0, &forms[s.0]);
                        rows.push(nonneg(&diff));
                    }
                }
                chosen
            }
        };
        forms.push(form);
    }
    for c in problem.property() {
        let mut f = vec![0.0; n_in + 1];
        for &(coeff, id) in &c.terms {
            scaled_add(&mut f, coeff, &forms[id.0]);
        }
        f[n_in] -= c.rhs;
        if c.relation == Relation::AtMost {
            f.iter_mut().for_each(|x| *x = -*x);
        }
        rows.push(nonneg(&f));
    }
    for r in rows {
        lp.add_row(r)?;
    }
    match lp.solve()? {
        LpOutcome::Optimal { solution, .. } => Ok(Some(solution[..n_in].to_vec())),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::Numeric("zero objective reported unbounded")),
    }
}

/// True iff some input realises the complete `fixture` and the property.
pub fn oracle_fixture_feasible(problem: &VerificationProblem, fixture: &PhaseFixture) -> Result<bool> {
    Ok(oracle_fixture_witness(problem, fixture)?.is_some())
}

/// Enumerates complete fixtures in mixed-radix order (first piecewise node
/// varies fastest) until one is feasible.
pub fn brute_force_oracle(problem: &VerificationProblem) -> Result<OracleResult> {
    let net = problem.network();
    let choices: Vec<(crate::network::NodeId, Vec<Phase>)> = net
        .ids()
        .filter_map(|id| match net.node(id).kind {
            NodeKind::Relu => Some((id, vec![Phase::Active, Phase::Inactive])),
            NodeKind::MaxPool => Some((id, (0..net.node(id).preds.len()).map(Phase::Edge).collect())),
            _ => None,
        })
        .collect();
    let mut total: u128 = 1;
    for (_, c) in &choices {
        total = total.saturating_mul(c.len() as u128);
        if total > ORACLE_CAP {
            return Err(Error::TooLarge(total, ORACLE_CAP));
        }
    }
    let mut digits = vec![0usize; choices.len()];
    let mut enumerated: u128 = 0;
    loop {
        let mut fixture = PhaseFixture::empty(net);
        for ((id, phases), &d) in choices.iter().zip(&digits) {
            fixture.set(*id, phases[d]);
        }
        enumerated += 1;
        if let Some(w) = oracle_fixture_witness(problem, &fixture)? {
            return Ok(OracleResult { witness: Some(w), fixtures_enumerated: enumerated });
        }
        let mut k = 0;
        loop {
            if k == digits.len() {
                return Ok(OracleResult { witness: None, fixtures_enumerated: enumerated });
            }
            digits[k] += 1;
            if digits[k] < choices[k].1.len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}
