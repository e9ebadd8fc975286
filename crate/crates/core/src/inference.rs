//! Implied phases from interval propagation under a partial fixture.
//!
//! One forward and one backward sweep over the network; no backward
//! reasoning through linear nodes.

use alloc::vec;
use alloc::vec::Vec;

use crate::network::{Network, NodeId, NodeKind};
use crate::relaxation::{affine_interval, maxpool_interval, relu_interval, BoundsMap, Interval, Phase, PhaseFixture};
use crate::sat::{Lit, PhaseEncoding};
use crate::SAFETY_MARGIN;

/// Per-node intervals under a fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureIntervals {
    values: Vec<Interval>,
    pre: Vec<Interval>,
    /// Number of sweeps performed; always 2.
    pub sweeps: usize,
}

impl FixtureIntervals {
    pub fn value(&self, id: NodeId) -> Interval {
        self.values[id.0]
    }

    pub fn pre(&self, id: NodeId) -> Interval {
        self.pre[id.0]
    }

    /// The first node whose value or pre-activation interval is empty.
    pub fn empty_node(&self) -> Option<NodeId> {
        let empty = |iv: &Interval| iv.lo > iv.hi + SAFETY_MARGIN;
        (0..self.values.len()).find(|&i| empty(&self.values[i]) || empty(&self.pre[i])).map(NodeId)
    }
}

/// Forward interval arithmetic respecting fixture pins, then a backward
/// sweep over MaxPool and ReLU nodes. Every interval is intersected with the
/// global bounds.
pub fn propagate_intervals(net: &Network, bounds: &BoundsMap, fixture: &PhaseFixture) -> FixtureIntervals {
    let mut values: Vec<Interval> = Vec::with_capacity(net.len());
    let mut pre: Vec<Interval> = Vec::with_capacity(net.len());
    for id in net.ids() {
        let node = net.node(id);
        let global_v = bounds.value(id);
        let global_p = bounds.pre(id);
        let (p, v) = match node.kind {
            NodeKind::Input => (global_p, global_v),
            NodeKind::Linear => {
                let iv = affine_interval(node.bias, &node.preds, &values).intersect(&global_v);
                (iv, iv)
            }
            NodeKind::Relu => {
                let p = affine_interval(node.bias, &node.preds, &values).intersect(&global_p);
                match fixture.get(id) {
                    Some(Phase::Inactive) => {
                        let p = p.intersect(&Interval::new(f64::NEG_INFINITY, 0.0));
                        (p, Interval::new(0.0, 0.0).intersect(&global_v))
                    }
                    Some(Phase::Active) => {
                        let p = p.intersect(&Interval::new(0.0, f64::INFINITY));
                        (p, p.intersect(&global_v))
                    }
                    _ => (p, relu_interval(p).intersect(&global_v)),
                }
            }
            NodeKind::MaxPool => {
                let own = maxpool_interval(node.preds.iter().map(|&(s, _)| values[s.0])).intersect(&global_v);
                let v = match fixture.get(id) {
                    Some(Phase::Edge(e)) if e < node.preds.len() => values[node.preds[e].0 .0].intersect(&own),
                    _ => own,
                };
                (v, v)
            }
        };
        pre.push(p);
        values.push(v);
    }

    for id in net.ids().rev() {
        let node = net.node(id);
        match node.kind {
            NodeKind::MaxPool => {
                let v = values[id.0];
                for &(s, _) in &node.preds {
                    values[s.0].hi = values[s.0].hi.min(v.hi);
                }
                if let Some(Phase::Edge(e)) = fixture.get(id) {
                    if let Some(&(s, _)) = node.preds.get(e) {
                        values[s.0].lo = values[s.0].lo.max(v.lo);
                    }
                }
                let mut below = node.preds.iter().filter(|&&(s, _)| values[s.0].hi < v.lo);
                let above: Vec<NodeId> =
                    node.preds.iter().map(|&(s, _)| s).filter(|s| values[s.0].hi >= v.lo).collect();
                if above.len() == 1 && below.next().is_some() {
                    let s = above[0];
                    values[s.0].lo = values[s.0].lo.max(v.lo);
                }
                for &(s, _) in &node.preds {
                    if net.node(s).kind != NodeKind::Relu {
                        pre[s.0] = values[s.0];
                    }
                }
            }
            NodeKind::Relu => {
                let v = values[id.0];
                let p = &mut pre[id.0];
                if v.lo > 0.0 {
                    p.lo = p.lo.max(v.lo);
                }
                p.hi = p.hi.min(v.hi);
            }
            NodeKind::Input | NodeKind::Linear => {}
        }
    }
    FixtureIntervals { values, pre, sweeps: 2 }
}

/// What interval propagation implies about unfixed nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Implication {
    /// The fixture cannot be realised.
    Conflict,
    Phases(Vec<(NodeId, Phase)>),
}

/// Phases implied for nodes the fixture leaves open.
pub fn implied_phases(net: &Network, bounds: &BoundsMap, fixture: &PhaseFixture) -> Implication {
    let iv = propagate_intervals(net, bounds, fixture);
    if iv.empty_node().is_some() {
        return Implication::Conflict;
    }
    let eps = SAFETY_MARGIN;
    let mut out = Vec::new();
    for id in net.ids() {
        if fixture.get(id).is_some() {
            continue;
        }
        let node = net.node(id);
        match node.kind {
            NodeKind::Relu => {
                let p = iv.pre(id);
                if p.lo > eps {
                    out.push((id, Phase::Active));
                } else if p.hi < -eps {
                    out.push((id, Phase::Inactive));
                }
            }
            NodeKind::MaxPool => {
                let v = iv.value(id);
                let preds: Vec<Interval> = node.preds.iter().map(|&(s, _)| iv.value(s)).collect();
                let chosen = (0..preds.len()).find(|&e| {
                    let others = (0..preds.len()).filter(|&i| i != e);
                    let dominates = others.clone().all(|i| preds[e].lo > preds[i].hi + eps);
                    let only_one_reaches = others.clone().all(|i| v.lo > preds[i].hi + eps);
                    dominates || only_one_reaches
                });
                if let Some(e) = chosen {
                    if preds.len() > 1 {
                        out.push((id, Phase::Edge(e)));
                    }
                }
            }
            NodeKind::Input | NodeKind::Linear => {}
        }
    }
    Implication::Phases(out)
}

/// Clauses `(¬p₁ ∨ … ∨ ¬pₖ ∨ x)` for each implied phase `x`, where the `pᵢ`
/// are the fixture's phase literals; a bare `(¬p₁ ∨ … ∨ ¬pₖ)` on conflict.
pub fn infer_node_phases(
    net: &Network,
    bounds: &BoundsMap,
    fixture: &PhaseFixture,
    enc: &PhaseEncoding,
) -> Vec<Vec<Lit>> {
    let blame: Vec<Lit> = enc.fixture_lits(fixture).into_iter().map(|l| !l).collect();
    match implied_phases(net, bounds, fixture) {
        Implication::Conflict => vec![blame],
        Implication::Phases(phases) => phases
            .into_iter()
            .filter_map(|(n, p)| enc.lit(n, p, true))
            .map(|l| {
                let mut c = blame.clone();
                c.push(l);
                c
            })
            .collect(),
    }
}
