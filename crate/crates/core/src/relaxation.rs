//! Linear over-approximation of a network.
//!
//! Every node gets a value variable; ReLU nodes additionally get a
//! pre-activation variable linked to their predecessors by an equality. ReLU
//! nodes are relaxed by the triangle `d ≥ 0, d ≥ c, d ≤ u(c − l)/(u − l)` over
//! their pre-activation bounds `[l, u]`, MaxPool nodes by `d ≥ cᵢ` and
//! `Σ cᵢ ≥ d + Σ lᵢ − max lᵢ`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lp::{BoundSide, LinearProgram, LpOutcome, Row, VarId, FEASIBILITY_TOL};
pub use crate::lp::export_lp;
use crate::network::{LinearConstraint, Network, NodeId, NodeKind, Relation, VerificationProblem};

/// Cumulative absolute bound change per sweep below which refinement stops.
pub const REFINE_CONVERGED: f64 = 1.0;
/// Bound updates after which refinement stops, once every node has been
/// refined [`REFINE_MIN_PER_NODE`] times.
pub const REFINE_UPDATE_CAP: usize = 5000;
pub const REFINE_MIN_PER_NODE: usize = 3;
/// Outward slack applied to LP-derived bounds.
const REFINE_MARGIN: f64 = FEASIBILITY_TOL;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Sound per-node bounds. `pre` holds the pre-activation interval of ReLU
/// nodes and repeats the value interval for every other node.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsMap {
    values: Vec<Interval>,
    pre: Vec<Interval>,
}

impl BoundsMap {
    pub fn from_parts(values: Vec<Interval>, pre: Vec<Interval>) -> Self {
        BoundsMap { values, pre }
    }

    pub fn value(&self, id: NodeId) -> Interval {
        self.values[id.0]
    }

    pub fn pre(&self, id: NodeId) -> Interval {
        self.pre[id.0]
    }

    pub fn set_value(&mut self, id: NodeId, iv: Interval) {
        self.values[id.0] = iv;
    }

    pub fn set_pre(&mut self, id: NodeId, iv: Interval) {
        self.pre[id.0] = iv;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True if every interval of `self` lies inside the matching one of `other`.
    pub fn within(&self, other: &BoundsMap) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| b.contains(a))
            && self.pre.iter().zip(&other.pre).all(|(a, b)| b.contains(a))
    }

    fn total_change(&self, before: &BoundsMap) -> f64 {
        let diff = |a: &[Interval], b: &[Interval]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x.lo - y.lo).abs() + (x.hi - y.hi).abs()).sum()
        };
        diff(&self.values, &before.values) + diff(&self.pre, &before.pre)
    }
}

/// Interval arithmetic in topological order, seeded from the input box.
pub fn compute_initial_bounds(problem: &VerificationProblem) -> BoundsMap {
    let net = problem.network();
    let mut values = Vec::with_capacity(net.len());
    let mut pre = Vec::with_capacity(net.len());
    let mut boxes = problem.input_box().iter();
    for node in net.nodes() {
        let (p, v) = match node.kind {
            NodeKind::Input => {
                let &(lo, hi) = boxes.next().expect("one box per input");
                let iv = Interval::new(lo, hi);
                (iv, iv)
            }
            NodeKind::Linear => {
                let iv = affine_interval(node.bias, &node.preds, &values);
                (iv, iv)
            }
            NodeKind::Relu => {
                let iv = affine_interval(node.bias, &node.preds, &values);
                (iv, relu_interval(iv))
            }
            NodeKind::MaxPool => {
                let iv = maxpool_interval(node.preds.iter().map(|&(s, _)| values[s.0]));
                (iv, iv)
            }
        };
        pre.push(p);
        values.push(v);
    }
    BoundsMap { values, pre }
}

pub(crate) fn affine_interval(bias: f64, preds: &[(NodeId, f64)], values: &[Interval]) -> Interval {
    let mut lo = bias;
    let mut hi = bias;
    for &(s, w) in preds {
        let iv = values[s.0];
        if w >= 0.0 {
            lo += w * iv.lo;
            hi += w * iv.hi;
        } else {
            lo += w * iv.hi;
            hi += w * iv.lo;
        }
    }
    Interval::new(lo, hi)
}

pub(crate) fn relu_interval(pre: Interval) -> Interval {
    Interval::new(pre.lo.max(0.0), pre.hi.max(0.0))
}

pub(crate) fn maxpool_interval(preds: impl Iterator<Item = Interval>) -> Interval {
    preds.fold(Interval::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |acc, iv| {
        Interval::new(acc.lo.max(iv.lo), acc.hi.max(iv.hi))
    })
}

/// LP variables of a relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationVars {
    value: Vec<VarId>,
    pre: Vec<Option<VarId>>,
}

impl RelaxationVars {
    pub fn value(&self, id: NodeId) -> VarId {
        self.value[id.0]
    }

    /// Pre-activation variable; ReLU nodes only.
    pub fn pre(&self, id: NodeId) -> Option<VarId> {
        self.pre[id.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub lp: LinearProgram,
    pub vars: RelaxationVars,
}

impl Relaxation {
    /// Splits an LP solution into per-node values and pre-activations.
    pub fn node_values(&self, solution: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let values: Vec<f64> = self.vars.value.iter().map(|v| solution[v.0]).collect();
        let pre = self
            .vars
            .pre
            .iter()
            .zip(&values)
            .map(|(p, &v)| p.map_or(v, |p| solution[p.0]))
            .collect();
        (values, pre)
    }
}

pub(crate) fn property_row(vars: &RelaxationVars, c: &LinearConstraint) -> Row {
    let terms = c.terms.iter().map(|&(coeff, id)| (vars.value(id), coeff)).collect();
    match c.relation {
        Relation::AtLeast => Row::ge(terms, c.rhs),
        Relation::AtMost => Row::le(terms, c.rhs),
    }
}

/// Builds the LP relaxation of `problem` under `bounds`, property included.
pub fn build_relaxation(problem: &VerificationProblem, bounds: &BoundsMap) -> Relaxation {
    let net = problem.network();
    let mut lp = LinearProgram::new();
    let mut value = Vec::with_capacity(net.len());
    let mut pre = Vec::with_capacity(net.len());
    for (i, node) in net.nodes().iter().enumerate() {
        let iv = bounds.values[i];
        value.push(lp.add_var(format!("v_{}", node.name), iv.lo, iv.hi));
        pre.push(if node.kind == NodeKind::Relu {
            let p = bounds.pre[i];
            Some(lp.add_var(format!("c_{}", node.name), p.lo, p.hi))
        } else {
            None
        });
    }
    let vars = RelaxationVars { value, pre };

    for (i, node) in net.nodes().iter().enumerate() {
        let id = NodeId(i);
        let d = vars.value(id);
        let weighted = |target: VarId| -> Row {
            let mut terms = vec![(target, 1.0)];
            terms.extend(node.preds.iter().map(|&(s, w)| (vars.value(s), -w)));
            Row::eq(terms, node.bias)
        };
        let rows = match node.kind {
            NodeKind::Input => Vec::new(),
            NodeKind::Linear => vec![weighted(d)],
            NodeKind::Relu => {
                let c = vars.pre(id).expect("relu has pre var");
                let mut rows = vec![weighted(c)];
                rows.extend(relu_rows(d, c, bounds.pre[i]));
                rows
            }
            NodeKind::MaxPool => {
                let mut rows: Vec<Row> = node
                    .preds
                    .iter()
                    .map(|&(s, _)| Row::ge(vec![(d, 1.0), (vars.value(s), -1.0)], 0.0))
                    .collect();
                let lows: Vec<f64> = node.preds.iter().map(|&(s, _)| bounds.values[s.0].lo).collect();
                let max_low = lows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let rhs: f64 = lows.iter().sum::<f64>() - max_low;
                let mut terms: Vec<(VarId, f64)> = node.preds.iter().map(|&(s, _)| (vars.value(s), 1.0)).collect();
                terms.push((d, -1.0));
                rows.push(Row::ge(terms, rhs));
                rows
            }
        };
        for row in rows {
            lp.add_row(row).expect("relaxation rows reference declared vars");
        }
    }
    for c in problem.property() {
        lp.add_row(property_row(&vars, c)).expect("property nodes validated");
    }
    Relaxation { lp, vars }
}

fn relu_rows(d: VarId, c: VarId, pre: Interval) -> Vec<Row> {
    let (l, u) = (pre.lo, pre.hi);
    if u <= 0.0 {
        vec![Row::eq(vec![(d, 1.0)], 0.0)]
    } else if l >= 0.0 {
        vec![Row::eq(vec![(d, 1.0), (c, -1.0)], 0.0)]
    } else {
        // d ≤ u(c − l)/(u − l)  ⇔  d − s·c ≤ −s·l  with s = u/(u − l)
        let s = u / (u - l);
        vec![
            Row::ge(vec![(d, 1.0)], 0.0),
            Row::ge(vec![(d, 1.0), (c, -1.0)], 0.0),
            Row::le(vec![(d, 1.0), (c, -s)], -s * l),
        ]
    }
}

/// The linear piece selected for a ReLU or MaxPool node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    /// ReLU `≤ 0`: output clamped to zero.
    Inactive,
    /// ReLU `≥ 0`: output equals the pre-activation.
    Active,
    /// MaxPool: the incoming edge at this index of `preds` supplies the max.
    Edge(usize),
}

/// A partial phase assignment, indexed by node.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhaseFixture {
    phases: Vec<Option<Phase>>,
}

impl PhaseFixture {
    pub fn empty(net: &Network) -> Self {
        PhaseFixture { phases: vec![None; net.len()] }
    }

    pub fn get(&self, id: NodeId) -> Option<Phase> {
        self.phases.get(id.0).copied().flatten()
    }

    pub fn set(&mut self, id: NodeId, phase: Phase) {
        if self.phases.len() <= id.0 {
            self.phases.resize(id.0 + 1, None);
        }
        self.phases[id.0] = Some(phase);
    }

    pub fn clear(&mut self, id: NodeId) {
        if let Some(p) = self.phases.get_mut(id.0) {
            *p = None;
        }
    }

    pub fn with(mut self, id: NodeId, phase: Phase) -> Self {
        self.set(id, phase);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Phase)> + '_ {
        self.phases.iter().enumerate().filter_map(|(i, p)| p.map(|p| (NodeId(i), p)))
    }

    pub fn len(&self) -> usize {
        self.phases.iter().filter(|p| p.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True if every piecewise node of `net` has a phase.
    pub fn is_complete(&self, net: &Network) -> bool {
        net.ids().all(|id| !net.node(id).kind.is_piecewise() || self.get(id).is_some())
    }
}

/// Rows enforcing the phases in `fixture`, grouped by node.
pub fn fixture_constraints(
    net: &Network,
    vars: &RelaxationVars,
    fixture: &PhaseFixture,
) -> Result<Vec<(NodeId, Vec<Row>)>> {
    let mut out = Vec::new();
    for (id, phase) in fixture.iter() {
        if id.0 >= net.len() {
            return Err(Error::UnknownNode(format!("#{}", id.0)));
        }
        let node = net.node(id);
        let d = vars.value(id);
        let rows = match (node.kind, phase) {
            (NodeKind::Relu, Phase::Inactive) => {
                let c = vars.pre(id).expect("relu");
                vec![Row::eq(vec![(d, 1.0)], 0.0), Row::le(vec![(c, 1.0)], 0.0)]
            }
            (NodeKind::Relu, Phase::Active) => {
                let c = vars.pre(id).expect("relu");
                vec![Row::le(vec![(d, 1.0), (c, -1.0)], 0.0)]
            }
            (NodeKind::MaxPool, Phase::Edge(k)) if k < node.preds.len() => {
                let src = vars.value(node.preds[k].0);
                vec![Row::eq(vec![(d, 1.0), (src, -1.0)], 0.0)]
            }
            _ => return Err(Error::InvalidNode { node: node.name.clone(), reason: "phase does not fit node" }),
        };
        out.push((id, rows));
    }
    Ok(out)
}

/// Why refinement stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineStop {
    /// A sweep changed the bounds by less than [`REFINE_CONVERGED`] in total.
    Converged,
    /// [`REFINE_UPDATE_CAP`] bound updates with every node refined at least
    /// [`REFINE_MIN_PER_NODE`] times.
    UpdateCap,
    /// The relaxation (with the property) has no solution.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    pub stop: RefineStop,
    /// Cumulative absolute change per completed or interrupted sweep.
    pub sweep_changes: Vec<f64>,
    /// Bounds before the first sweep and after each sweep.
    pub history: Vec<BoundsMap>,
    pub updates: usize,
    pub per_node_updates: Vec<usize>,
    pub lp_solves: usize,
}

/// Refined bounds; `None` when the relaxation is infeasible, which makes the
/// whole problem unsatisfiable.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub bounds: Option<BoundsMap>,
    pub report: RefineReport,
}

/// Tightens `bounds` by minimising and maximising every node variable over
/// the relaxation, rebuilding the relaxation after each sweep.
pub fn refine_bounds(problem: &VerificationProblem, bounds: &BoundsMap) -> Result<Refinement> {
    let net = problem.network();
    let mut current = bounds.clone();
    let mut report = RefineReport {
        stop: RefineStop::Converged,
        sweep_changes: Vec::new(),
        history: vec![current.clone()],
        updates: 0,
        per_node_updates: vec![0; net.len()],
        lp_solves: 0,
    };
    'sweeps: loop {
        let before = current.clone();
        let mut relax = build_relaxation(problem, &current);
        let mut capped = false;
        for id in net.ids() {
            let mut targets: Vec<(VarId, bool)> = Vec::with_capacity(2);
            if let Some(c) = relax.vars.pre(id) {
                targets.push((c, true));
            }
            targets.push((relax.vars.value(id), false));
            for (var, is_pre) in targets {
                let old = if is_pre { current.pre[id.0] } else { current.values[id.0] };
                let mut iv = old;
                for (sign, side) in [(1.0, BoundSide::Lower), (-1.0, BoundSide::Upper)] {
                    relax.lp.set_objective(vec![(var, sign)]);
                    report.lp_solves += 1;
                    report.updates += 1;
                    match relax.lp.solve()? {
                        LpOutcome::Infeasible => {
                            report.stop = RefineStop::Infeasible;
                            report.sweep_changes.push(current.total_change(&before));
                            return Ok(Refinement { bounds: None, report });
                        }
                        LpOutcome::Unbounded => {}
                        LpOutcome::Optimal { objective, .. } => {
                            let opt = sign * objective;
                            match side {
                                BoundSide::Lower => iv.lo = iv.lo.max(opt - REFINE_MARGIN).min(iv.hi),
                                BoundSide::Upper => iv.hi = iv.hi.min(opt + REFINE_MARGIN).max(iv.lo),
                            }
                            let v = if side == BoundSide::Lower { iv.lo } else { iv.hi };
                            relax.lp.tighten_var_bound(var, side, v)?;
                        }
                    }
                }
                if is_pre {
                    current.pre[id.0] = iv;
                } else {
                    current.values[id.0] = iv;
                    if net.node(id).kind != NodeKind::Relu {
                        current.pre[id.0] = iv;
                    }
                }
            }
            if net.node(id).kind == NodeKind::Relu {
                let clamp = relu_interval(current.pre[id.0]);
                let v = current.values[id.0].intersect(&clamp);
                if !v.is_empty() {
                    current.values[id.0] = v;
                }
            }
            report.per_node_updates[id.0] += 1;
            if report.updates >= REFINE_UPDATE_CAP
                && report.per_node_updates.iter().all(|&n| n >= REFINE_MIN_PER_NODE)
            {
                capped = true;
                break;
            }
        }
        let change = current.total_change(&before);
        report.sweep_changes.push(change);
        report.history.push(current.clone());
        if capped {
            report.stop = RefineStop::UpdateCap;
            break 'sweeps;
        }
        if change < REFINE_CONVERGED {
            report.stop = RefineStop::Converged;
            break 'sweeps;
        }
    }
    Ok(Refinement { bounds: Some(current), report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;
    use crate::testutil;
    use proptest::prelude::*;

    fn boxed(net: Network, boxes: &[(&str, f64, f64)], extra: Vec<LinearConstraint>) -> VerificationProblem {
        let mut property = Vec::new();
        for &(name, lo, hi) in boxes {
            let id = net.find(name).unwrap();
            property.push(LinearConstraint::at_least(vec![(1.0, id)], lo));
            property.push(LinearConstraint::at_most(vec![(1.0, id)], hi));
        }
        property.extend(extra);
        VerificationProblem::new(net, property).unwrap()
    }

    fn min_max(lp: &mut LinearProgram, var: VarId) -> (f64, f64) {
        let mut out = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            lp.set_objective(vec![(var, sign)]);
            match lp.solve().unwrap() {
                LpOutcome::Optimal { objective, .. } => out[k] = sign * objective,
                other => panic!("{other:?}"),
            }
        }
        (out[0], out[1])
    }

    #[test]
    fn interval_arithmetic_examples() {
        let mut b = NetworkBuilder::new();
        b.input("a").input("b").relu("r", 0.5, &[(1.0, "a"), (-2.0, "b")]);
        let p = boxed(b.build().unwrap(), &[("a", 0.0, 1.0), ("b", 0.0, 1.0)], Vec::new());
        let bounds = compute_initial_bounds(&p);
        assert_eq!(bounds.pre(NodeId(2)), Interval::new(-1.5, 1.5));
        assert_eq!(bounds.value(NodeId(2)), Interval::new(0.0, 1.5));
    }

    #[test]
    fn maxpool_bounds_are_componentwise_max() {
        let iv = maxpool_interval([Interval::new(0.0, 1.5), Interval::new(0.1, 2.0)].into_iter());
        assert_eq!(iv, Interval::new(0.1, 2.0));
    }

    #[test]
    fn triangle_at_zero_allows_half() {
        let mut b = NetworkBuilder::new();
        b.input("x").relu("y", 0.0, &[(1.0, "x")]);
        let p = boxed(b.build().unwrap(), &[("x", -1.0, 1.0)], Vec::new());
        let bounds = compute_initial_bounds(&p);
        let mut relax = build_relaxation(&p, &bounds);
        let c = relax.vars.pre(NodeId(1)).unwrap();
        relax.lp.add_row(Row::eq(vec![(c, 1.0)], 0.0)).unwrap();
        let d = relax.vars.value(NodeId(1));
        let (lo, hi) = min_max(&mut relax.lp, d);
        assert!(lo.abs() < 1e-9 && (hi - 0.5).abs() < 1e-9, "{lo} {hi}");
    }

    #[test]
    fn maxpool_sum_row_uses_lower_bounds() {
        let mut b = NetworkBuilder::new();
        b.input("a").input("b").input("c").maxpool("m", &["a", "b", "c"]);
        let p = boxed(
            b.build().unwrap(),
            &[("a", 1.0, 3.0), ("b", 2.0, 3.0), ("c", 0.0, 3.0)],
            Vec::new(),
        );
        let relax = build_relaxation(&p, &compute_initial_bounds(&p));
        let sum_row = relax.lp.rows().iter().find(|r| r.terms.len() == 4).unwrap();
        assert_eq!(sum_row.rhs, 1.0);

        let mut b = NetworkBuilder::new();
        b.input("a").input("b").maxpool("m", &["a", "b"]);
        let p = boxed(b.build().unwrap(), &[("a", 0.0, 1.0), ("b", 0.0, 1.0)], Vec::new());
        let relax = build_relaxation(&p, &compute_initial_bounds(&p));
        let rows: Vec<&Row> = relax.lp.rows().iter().filter(|r| r.terms.len() >= 2).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].rhs, 0.0);
    }

    #[test]
    fn triangle_endpoints_are_forced() {
        let d = VarId(0);
        let c = VarId(1);
        let pre = Interval::new(-2.0, 3.0);
        for (cv, expected) in [(-2.0, 0.0), (3.0, 3.0)] {
            let mut lp = LinearProgram::new();
            lp.add_var("d", f64::NEG_INFINITY, f64::INFINITY);
            lp.add_var("c", cv, cv);
            for r in relu_rows(d, c, pre) {
                lp.add_row(r).unwrap();
            }
            let (lo, hi) = min_max(&mut lp, d);
            assert!((lo - expected).abs() < 1e-9 && (hi - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_preactivation_interval_is_constant() {
        let rows = relu_rows(VarId(0), VarId(1), Interval::new(0.7, 0.7));
        assert_eq!(rows, vec![Row::eq(vec![(VarId(0), 1.0), (VarId(1), -1.0)], 0.0)]);
        let rows = relu_rows(VarId(0), VarId(1), Interval::new(-0.7, -0.7));
        assert_eq!(rows, vec![Row::eq(vec![(VarId(0), 1.0)], 0.0)]);
    }

    #[test]
    fn maxpool_relaxation_is_tight_on_grid() {
        // Each of d ≥ c₁, d ≥ c₂, c₁ + c₂ ≥ d + l₁ + l₂ − max(l₁, l₂) holds with
        // equality somewhere on the graph of max over the box.
        let (l1, u1, l2, u2) = (-0.5, 1.0, 0.25, 1.5);
        let steps = 20;
        let mut tight = [false; 3];
        for i in 0..=steps {
            for j in 0..=steps {
                let c1 = l1 + (u1 - l1) * i as f64 / steps as f64;
                let c2 = l2 + (u2 - l2) * j as f64 / steps as f64;
                let d = c1.max(c2);
                let slacks = [d - c1, d - c2, c1 + c2 - d - (l1 + l2 - l1.max(l2))];
                for (k, s) in slacks.iter().enumerate() {
                    assert!(*s >= -1e-12);
                    tight[k] |= s.abs() < 1e-12;
                }
            }
        }
        assert_eq!(tight, [true; 3]);
    }

    #[test]
    fn refinement_uses_property() {
        let mut b = NetworkBuilder::new();
        b.input("x").relu("y", 0.0, &[(1.0, "x")]);
        let net = b.build().unwrap();
        let x = NodeId(0);
        let p = boxed(net.clone(), &[("x", -1.0, 1.0)], vec![LinearConstraint::at_least(vec![(1.0, x)], 0.2)]);
        let r = refine_bounds(&p, &compute_initial_bounds(&p)).unwrap();
        let bounds = r.bounds.unwrap();
        assert!((bounds.value(NodeId(1)).lo - 0.2).abs() < 1e-6);

        let p = boxed(net, &[("x", -1.0, 1.0)], vec![LinearConstraint::at_most(vec![(1.0, x)], -0.5)]);
        let r = refine_bounds(&p, &compute_initial_bounds(&p)).unwrap();
        let y = r.bounds.unwrap().value(NodeId(1));
        assert!(y.lo.abs() < 1e-6 && y.hi.abs() < 1e-6, "{y:?}");
    }

    #[test]
    fn infeasible_relaxation_reported() {
        let mut b = NetworkBuilder::new();
        b.input("x").relu("y", 0.0, &[(1.0, "x")]);
        let net = b.build().unwrap();
        let p = boxed(net, &[("x", -1.0, 1.0)], vec![LinearConstraint::at_least(vec![(1.0, NodeId(1))], 2.0)]);
        let r = refine_bounds(&p, &compute_initial_bounds(&p)).unwrap();
        assert!(r.bounds.is_none());
        assert_eq!(r.report.stop, RefineStop::Infeasible);
    }

    #[test]
    fn fixture_rows_shape() {
        let mut b = NetworkBuilder::new();
        b.input("x").relu("y", 0.0, &[(1.0, "x")]);
        let net = b.build().unwrap();
        let p = boxed(net.clone(), &[("x", -1.0, 1.0)], vec![LinearConstraint::at_least(vec![(1.0, NodeId(1))], 0.5)]);
        let mut relax = build_relaxation(&p, &compute_initial_bounds(&p));
        let inactive = PhaseFixture::empty(&net).with(NodeId(1), Phase::Inactive);
        let rows = fixture_constraints(&net, &relax.vars, &inactive).unwrap();
        assert_eq!(rows.len(), 1);
        relax.lp.push_batch("fix", rows.into_iter().flat_map(|(_, r)| r).collect()).unwrap();
        assert_eq!(relax.lp.solve().unwrap(), LpOutcome::Infeasible);

        let bad = PhaseFixture::empty(&net).with(NodeId(1), Phase::Edge(0));
        assert!(fixture_constraints(&net, &relax.vars, &bad).is_err());
    }

    #[test]
    fn active_fixture_makes_relu_exact() {
        let mut b = NetworkBuilder::new();
        b.input("x").relu("y", 0.0, &[(1.0, "x")]);
        let net = b.build().unwrap();
        let p = boxed(net.clone(), &[("x", 0.2, 1.0)], Vec::new());
        let mut relax = build_relaxation(&p, &compute_initial_bounds(&p));
        let fix = PhaseFixture::empty(&net).with(NodeId(1), Phase::Active);
        let rows = fixture_constraints(&net, &relax.vars, &fix).unwrap();
        relax.lp.push_batch("fix", rows.into_iter().flat_map(|(_, r)| r).collect()).unwrap();
        relax.lp.set_objective(vec![(relax.vars.value(NodeId(1)), 1.0)]);
        match relax.lp.solve().unwrap() {
            LpOutcome::Optimal { solution, .. } => {
                let (values, pre) = relax.node_values(&solution);
                assert!((values[1] - pre[1]).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn exact_valuations_satisfy_relaxation(seed in 0u64..10_000) {
            let problem = testutil::random_problem(seed);
            let boxed_only = problem.with_property(problem.box_constraints()).unwrap();
            let bounds = compute_initial_bounds(&boxed_only);
            let relax = build_relaxation(&boxed_only, &bounds);
            let mut rng = testutil::rng(seed);
            for _ in 0..50 {
                let x = testutil::sample_inputs(&boxed_only, &mut rng);
                let val = boxed_only.network().evaluate(&x).unwrap();
                let mut point = vec![0.0; relax.lp.vars().len()];
                for id in boxed_only.network().ids() {
                    point[relax.vars.value(id).0] = val.value(id);
                    if let Some(c) = relax.vars.pre(id) {
                        point[c.0] = val.pre_activation(id);
                    }
                }
                prop_assert!(relax.lp.max_violation(&point) <= 1e-6);
            }
        }

        #[test]
        fn refinement_never_widens(seed in 0u64..10_000) {
            let problem = testutil::random_problem(seed);
            let initial = compute_initial_bounds(&problem);
            let r = refine_bounds(&problem, &initial).unwrap();
            for pair in r.report.history.windows(2) {
                prop_assert!(pair[1].within(&pair[0]));
            }
            if let Some(b) = &r.bounds {
                prop_assert!(b.within(&initial));
            }
        }
    }
}
