//! Checking partial phase fixtures against the relaxation.
//!
//! An infeasible fixture is shrunk by elastic filtering into a small blamed
//! subset. A feasible one is solved with an objective that pulls unfixed
//! nodes onto their exact graph; nodes that land there extend the fixture,
//! and the extended fixture is cached as known feasible.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lp::{BoundSide, LinearProgram, LpOutcome, Row, VarId, FEASIBILITY_TOL};
use crate::network::{argmax, Network, NodeId, NodeKind};
use crate::relaxation::{fixture_constraints, BoundsMap, Phase, PhaseFixture, Relaxation};
use crate::SAFETY_MARGIN;

pub const CACHE_CAPACITY: usize = 4096;
/// Objective weight of unfixed MaxPool values; unfixed ReLU values weigh 1.
pub const MAXPOOL_WEIGHT: f64 = 0.1;
/// Negative weight on unfixed ReLU pre-activations. Among optima with equal
/// node values it prefers the one where `d = c`, i.e. the tight one.
pub const TIGHT_PULL: f64 = 1e-3;
const FIXTURE_BATCH: &str = "fixture";

/// Fixed phases as a sorted list.
pub type PhaseSet = Vec<(NodeId, Phase)>;

fn phase_set(fixture: &PhaseFixture) -> PhaseSet {
    fixture.iter().collect()
}

fn is_subset(small: &[(NodeId, Phase)], big: &[(NodeId, Phase)]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.by_ref().any(|y| y == x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub phases: PhaseSet,
    /// Node values of the LP solution that established feasibility.
    pub values: Vec<f64>,
}

/// Phase sets known feasible in the relaxation. A query hits when it is a
/// subset of a stored set. Oldest entries are evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleCache {
    entries: VecDeque<CacheEntry>,
    capacity: usize,
}

impl Default for FeasibleCache {
    fn default() -> Self {
        FeasibleCache::new(CACHE_CAPACITY)
    }
}

impl FeasibleCache {
    /// A capacity of zero disables the cache.
    pub fn new(capacity: usize) -> Self {
        FeasibleCache { entries: VecDeque::new(), capacity }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn lookup(&self, fixture: &PhaseFixture) -> Option<&CacheEntry> {
        let query = phase_set(fixture);
        self.entries.iter().find(|e| is_subset(&query, &e.phases))
    }

    pub fn insert(&mut self, mut phases: PhaseSet, values: Vec<f64>) {
        if self.capacity == 0 {
            return;
        }
        phases.sort();
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(CacheEntry { phases, values });
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FixtureCounters {
    pub lp_solves: u64,
    pub cache_hits: u64,
    pub conflict_clauses: u64,
    pub conflict_literals: u64,
    pub inferred_clauses: u64,
}

/// `(¬p₁ ∨ … ∨ ¬pₖ) ∨ (x_{v₁,≥0} ∨ … ∨ x_{vₘ,≥0})`: under the premise, some
/// listed ReLU node is active.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferredClause {
    pub premise: PhaseSet,
    pub active: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityReport {
    /// The blamed phases cannot hold together; the conflict clause is the
    /// disjunction of their negations.
    Infeasible { blamed: PhaseSet },
    Feasible {
        /// Node values of the LP optimum; on a cache hit, those stored with
        /// the entry.
        values: Vec<f64>,
        /// Unfixed nodes found on their exact graph, with their phase.
        tight: PhaseSet,
        inferred: Option<InferredClause>,
        from_cache: bool,
    },
}

/// Weight 1 on every unfixed ReLU value, [`MAXPOOL_WEIGHT`] on every
/// unfixed MaxPool value, minimised.
pub fn tight_objective(net: &Network, relax: &Relaxation, fixture: &PhaseFixture) -> Vec<(VarId, f64)> {
    net.ids()
        .filter(|&id| fixture.get(id).is_none())
        .filter_map(|id| match net.node(id).kind {
            NodeKind::Relu => Some((relax.vars.value(id), 1.0)),
            NodeKind::MaxPool => Some((relax.vars.value(id), MAXPOOL_WEIGHT)),
            _ => None,
        })
        .collect()
}

/// [`tight_objective`] plus the [`TIGHT_PULL`] tie-break.
pub fn search_objective(net: &Network, relax: &Relaxation, fixture: &PhaseFixture) -> Vec<(VarId, f64)> {
    let mut obj = tight_objective(net, relax, fixture);
    for id in net.ids().filter(|&id| fixture.get(id).is_none()) {
        if let Some(c) = relax.vars.pre(id) {
            obj.push((c, -TIGHT_PULL));
        }
    }
    obj
}

/// Nodes whose value sits on the exact activation within `tolerance`, with
/// the phase the solution exhibits. Fixed nodes are skipped.
pub fn tight_set(net: &Network, values: &[f64], pre: &[f64], fixture: &PhaseFixture, tolerance: f64) -> PhaseSet {
    let mut out = Vec::new();
    for id in net.ids() {
        if fixture.get(id).is_some() {
            continue;
        }
        let node = net.node(id);
        let d = values[id.0];
        match node.kind {
            NodeKind::Relu => {
                let c = pre[id.0];
                if (d - c.max(0.0)).abs() <= tolerance {
                    out.push((id, if c > 0.0 { Phase::Active } else { Phase::Inactive }));
                }
            }
            NodeKind::MaxPool => {
                let e = argmax(node.preds.iter().map(|&(s, _)| values[s.0]));
                if (d - values[node.preds[e].0 .0]).abs() <= tolerance {
                    out.push((id, Phase::Edge(e)));
                }
            }
            _ => {}
        }
    }
    out
}

/// The clause forcing some unfixed ReLU to be active, if the optimum
/// justifies it.
///
/// Besides an unfixed ReLU above `tolerance` and every MaxPool value being
/// attained by some predecessor, the optimal objective must exceed the most
/// a realisation with every unfixed ReLU inactive could score, which is the
/// weighted sum of unfixed MaxPool upper bounds plus the largest
/// contribution of the [`TIGHT_PULL`] terms at non-positive
/// pre-activations. Only then is the clause implied. `objective` is the
/// optimum of [`search_objective`].
pub fn inferred_clause(
    net: &Network,
    bounds: &BoundsMap,
    fixture: &PhaseFixture,
    values: &[f64],
    objective: f64,
    tolerance: f64,
) -> Option<InferredClause> {
    let unfixed = |id: NodeId| fixture.get(id).is_none();
    let active: Vec<NodeId> =
        net.ids().filter(|&id| net.node(id).kind == NodeKind::Relu && unfixed(id)).collect();
    if !active.iter().any(|id| values[id.0] > tolerance) {
        return None;
    }
    let maxpools_valid = net.ids().filter(|&id| net.node(id).kind == NodeKind::MaxPool).all(|id| {
        net.node(id).preds.iter().any(|&(s, _)| (values[id.0] - values[s.0]).abs() <= tolerance)
    });
    if !maxpools_valid {
        return None;
    }
    let ceiling: f64 = net
        .ids()
        .filter(|&id| net.node(id).kind == NodeKind::MaxPool && unfixed(id))
        .map(|id| MAXPOOL_WEIGHT * bounds.value(id).hi)
        .sum::<f64>()
        + active.iter().map(|&id| TIGHT_PULL * (-bounds.pre(id).lo).max(0.0)).sum::<f64>();
    if objective <= ceiling + tolerance {
        return None;
    }
    Some(InferredClause { premise: phase_set(fixture), active })
}

/// Elastic rows for one fixed node, weakened by slack `s`.
fn elastic_rows(net: &Network, relax: &Relaxation, id: NodeId, phase: Phase, s: VarId) -> Result<Vec<Row>> {
    let d = relax.vars.value(id);
    let node = net.node(id);
    Ok(match (node.kind, phase) {
        (NodeKind::Relu, Phase::Inactive) => {
            let c = relax.vars.pre(id).expect("relu");
            vec![
                Row::le(vec![(c, 1.0), (s, -1.0)], 0.0),
                Row::le(vec![(d, 1.0), (s, -1.0)], 0.0),
                Row::ge(vec![(d, 1.0), (s, 1.0)], 0.0),
            ]
        }
        (NodeKind::Relu, Phase::Active) => {
            let c = relax.vars.pre(id).expect("relu");
            vec![Row::le(vec![(d, 1.0), (c, -1.0), (s, -1.0)], 0.0)]
        }
        (NodeKind::MaxPool, Phase::Edge(e)) if e < node.preds.len() => {
            let src = relax.vars.value(node.preds[e].0);
            vec![
                Row::le(vec![(d, 1.0), (src, -1.0), (s, -1.0)], 0.0),
                Row::ge(vec![(d, 1.0), (src, -1.0), (s, 1.0)], 0.0),
            ]
        }
        _ => return Err(Error::InvalidNode { node: node.name.clone(), reason: "phase does not fit node" }),
    })
}

fn fixture_lp(net: &Network, relax: &Relaxation, phases: &[(NodeId, Phase)]) -> Result<LinearProgram> {
    let mut fix = PhaseFixture::empty(net);
    for &(n, p) in phases {
        fix.set(n, p);
    }
    let mut lp = relax.lp.clone();
    for (_, rows) in fixture_constraints(net, &relax.vars, &fix)? {
        for r in rows {
            lp.add_row(r)?;
        }
    }
    lp.set_objective(Vec::new());
    Ok(lp)
}

/// Shrinks an infeasible fixture to a subset that is still infeasible.
///
/// Each fixed node gets one slack relaxing its fixture rows. The slack sum
/// is minimised; the node with the largest slack (lowest index on ties) has
/// its slack pinned to zero, and this repeats until the program becomes
/// infeasible. The pinned nodes form the result, which is confirmed
/// infeasible by a final solve without slacks.
pub fn elastic_filter(
    net: &Network,
    relax: &Relaxation,
    fixture: &PhaseFixture,
    counters: &mut FixtureCounters,
) -> Result<PhaseSet> {
    let fixed = phase_set(fixture);
    let mut lp = relax.lp.clone();
    let mut slacks = Vec::with_capacity(fixed.len());
    for &(id, phase) in &fixed {
        let s = lp.add_var(alloc::format!("s_{}", net.name(id)), 0.0, f64::INFINITY);
        for r in elastic_rows(net, relax, id, phase, s)? {
            lp.add_row(r)?;
        }
        slacks.push(s);
    }
    lp.set_objective(slacks.iter().map(|&s| (s, 1.0)).collect());
    let mut strict = vec![false; fixed.len()];
    let mut first = true;
    loop {
        counters.lp_solves += 1;
        let solution = match lp.solve()? {
            LpOutcome::Infeasible => break,
            LpOutcome::Unbounded => return Err(Error::Numeric("slack sum unbounded")),
            LpOutcome::Optimal { solution, objective } => {
                if first && objective <= FEASIBILITY_TOL {
                    return Err(Error::NotInfeasible);
                }
                solution
            }
        };
        first = false;
        let pick = (0..fixed.len())
            .filter(|&k| !strict[k])
            .fold(None, |best: Option<usize>, k| match best {
                Some(b) if solution[slacks[b].0] >= solution[slacks[k].0] => Some(b),
                _ => Some(k),
            });
        match pick {
            Some(k) => {
                strict[k] = true;
                lp.tighten_var_bound(slacks[k], BoundSide::Upper, 0.0)?;
            }
            // Every slack is pinned yet the solver still finds a point
            // within tolerance; blame the whole fixture.
            None => break,
        }
    }
    let blamed: PhaseSet = fixed.iter().zip(&strict).filter(|(_, &s)| s).map(|(p, _)| *p).collect();
    if blamed.len() < fixed.len() {
        counters.lp_solves += 1;
        if !fixture_lp(net, relax, &blamed)?.solve()?.is_infeasible() {
            return Ok(fixed);
        }
    }
    Ok(blamed)
}

/// Checks `fixture` against the relaxation. The relaxation's LP is returned
/// to its previous state.
pub fn check_feasibility(
    net: &Network,
    relax: &mut Relaxation,
    bounds: &BoundsMap,
    fixture: &PhaseFixture,
    cache: &mut FeasibleCache,
    counters: &mut FixtureCounters,
) -> Result<FeasibilityReport> {
    if let Some(entry) = cache.lookup(fixture) {
        counters.cache_hits += 1;
        return Ok(FeasibilityReport::Feasible {
            values: entry.values.clone(),
            tight: Vec::new(),
            inferred: None,
            from_cache: true,
        });
    }
    let rows: Vec<Row> = fixture_constraints(net, &relax.vars, fixture)?.into_iter().flat_map(|(_, r)| r).collect();
    relax.lp.set_objective(search_objective(net, relax, fixture));
    relax.lp.push_batch(FIXTURE_BATCH, rows)?;
    counters.lp_solves += 1;
    let outcome = relax.lp.solve();
    relax.lp.pop_batch(FIXTURE_BATCH)?;
    match outcome? {
        LpOutcome::Infeasible => {
            // The elastic program can land on the other side of the
            // feasibility tolerance; blame everything then.
            let blamed = match elastic_filter(net, relax, fixture, counters) {
                Err(Error::NotInfeasible) => phase_set(fixture),
                other => other?,
            };
            counters.conflict_clauses += 1;
            counters.conflict_literals += blamed.len() as u64;
            Ok(FeasibilityReport::Infeasible { blamed })
        }
        LpOutcome::Unbounded => Err(Error::Numeric("relaxation objective unbounded")),
        LpOutcome::Optimal { solution, objective } => {
            let (values, pre) = relax.node_values(&solution);
            let tight = tight_set(net, &values, &pre, fixture, SAFETY_MARGIN);
            let mut extended = phase_set(fixture);
            extended.extend(tight.iter().copied());
            cache.insert(extended, values.clone());
            let inferred = inferred_clause(net, bounds, fixture, &values, objective, SAFETY_MARGIN);
            if inferred.is_some() {
                counters.inferred_clauses += 1;
            }
            Ok(FeasibilityReport::Feasible { values, tight, inferred, from_cache: false })
        }
    }
}
