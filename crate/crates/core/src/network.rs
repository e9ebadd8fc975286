//! Networks, exact evaluation and verification problems.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Index of a node in declaration (topological) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Input,
    Linear,
    Relu,
    MaxPool,
}

impl NodeKind {
    /// Kinds whose behaviour depends on a phase choice.
    pub fn is_piecewise(self) -> bool {
        matches!(self, NodeKind::Relu | NodeKind::MaxPool)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// Zero for inputs and MaxPool nodes.
    pub bias: f64,
    /// Incoming edges as `(source, weight)`. MaxPool edges carry weight 1.
    pub preds: Vec<(NodeId, f64)>,
}

/// A validated feed-forward network. Nodes are stored in a topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    inputs: Vec<NodeId>,
    outputs: Vec<NodeId>,
}

impl Network {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Input nodes in declaration order.
    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    /// Nodes without outgoing edges, in declaration order.
    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.0].name
    }

    /// All edges as `(source, target, weight)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.nodes.iter().enumerate().flat_map(|(t, n)| {
            n.preds.iter().map(move |&(s, w)| (s, NodeId(t), w))
        })
    }

    /// Exact forward evaluation.
    pub fn evaluate(&self, inputs: &[f64]) -> Result<Valuation> {
        if inputs.len() != self.inputs.len() {
            return Err(Error::Arity {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        let mut values = vec![0.0; self.nodes.len()];
        let mut pre = vec![0.0; self.nodes.len()];
        let mut next_input = inputs.iter();
        for (i, node) in self.nodes.iter().enumerate() {
            let weighted = || {
                node.preds
                    .iter()
                    .fold(node.bias, |acc, &(s, w)| acc + w * values[s.0])
            };
            let (p, v) = match node.kind {
                NodeKind::Input => {
                    let x = *next_input.next().expect("arity checked");
                    (x, x)
                }
                NodeKind::Linear => {
                    let s = weighted();
                    (s, s)
                }
                NodeKind::Relu => {
                    let s = weighted();
                    (s, s.max(0.0))
                }
                NodeKind::MaxPool => {
                    let m = node
                        .preds
                        .iter()
                        .map(|&(s, _)| values[s.0])
                        .fold(f64::NEG_INFINITY, f64::max);
                    (m, m)
                }
            };
            pre[i] = p;
            values[i] = v;
        }
        Ok(Valuation { values, pre })
    }

    /// Index (zero-based, into [`Network::outputs`]) of the largest output.
    /// Ties go to the lowest index.
    pub fn classify(&self, inputs: &[f64]) -> Result<usize> {
        if self.outputs.is_empty() {
            return Err(Error::NoOutputs);
        }
        let val = self.evaluate(inputs)?;
        Ok(argmax(self.outputs.iter().map(|&o| val.value(o))))
    }
}

/// Lowest index of the maximum.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Node values produced by [`Network::evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    values: Vec<f64>,
    pre: Vec<f64>,
}

impl Valuation {
    pub fn value(&self, id: NodeId) -> f64 {
        self.values[id.0]
    }

    /// Weighted input sum plus bias for ReLU and linear nodes; the value
    /// itself for inputs and MaxPool nodes.
    pub fn pre_activation(&self, id: NodeId) -> f64 {
        self.pre[id.0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    /// `Σ terms ≥ rhs`
    AtLeast,
    /// `Σ terms ≤ rhs`
    AtMost,
}

/// `Σ coeff·value(node) (≥|≤) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(f64, NodeId)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn at_least(terms: Vec<(f64, NodeId)>, rhs: f64) -> Self {
        LinearConstraint { terms, relation: Relation::AtLeast, rhs }
    }

    pub fn at_most(terms: Vec<(f64, NodeId)>, rhs: f64) -> Self {
        LinearConstraint { terms, relation: Relation::AtMost, rhs }
    }

    /// Signed distance to violation: non-negative iff satisfied.
    pub fn slack(&self, values: &[f64]) -> f64 {
        let lhs: f64 = self.terms.iter().map(|&(c, id)| c * values[id.0]).sum();
        match self.relation {
            Relation::AtLeast => lhs - self.rhs,
            Relation::AtMost => self.rhs - lhs,
        }
    }
}

/// A network plus a conjunctive property over its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationProblem {
    network: Network,
    property: Vec<LinearConstraint>,
    input_box: Vec<(f64, f64)>,
}

impl VerificationProblem {
    /// Validates constraint terms and derives the input box from the
    /// single-variable constraints over input nodes.
    pub fn new(network: Network, property: Vec<LinearConstraint>) -> Result<Self> {
        let mut lower = vec![f64::NEG_INFINITY; network.len()];
        let mut upper = vec![f64::INFINITY; network.len()];
        for c in &property {
            for (i, &(_, id)) in c.terms.iter().enumerate() {
                if id.0 >= network.len() {
                    return Err(Error::UnknownNode(id.0.to_string()));
                }
                if c.terms[..i].iter().any(|&(_, other)| other == id) {
                    return Err(Error::DuplicateTerm(network.name(id).into()));
                }
            }
            if let [(coeff, id)] = c.terms[..] {
                if coeff == 0.0 || network.node(id).kind != NodeKind::Input {
                    continue;
                }
                let bound = c.rhs / coeff;
                let is_lower = (c.relation == Relation::AtLeast) == (coeff > 0.0);
                if is_lower {
                    lower[id.0] = lower[id.0].max(bound);
                } else {
                    upper[id.0] = upper[id.0].min(bound);
                }
            }
        }
        let mut input_box = Vec::with_capacity(network.inputs().len());
        for &id in network.inputs() {
            let (lo, hi) = (lower[id.0], upper[id.0]);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::UnboundedInput(network.name(id).into()));
            }
            input_box.push((lo, hi));
        }
        Ok(VerificationProblem { network, property, input_box })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn property(&self) -> &[LinearConstraint] {
        &self.property
    }

    /// Box bounds per input, in input order.
    pub fn input_box(&self) -> &[(f64, f64)] {
        &self.input_box
    }

    /// The single-variable input bounds as constraints, useful as the base
    /// of derived queries.
    pub fn box_constraints(&self) -> Vec<LinearConstraint> {
        let mut out = Vec::new();
        for (&id, &(lo, hi)) in self.network.inputs().iter().zip(&self.input_box) {
            out.push(LinearConstraint::at_least(vec![(1.0, id)], lo));
            out.push(LinearConstraint::at_most(vec![(1.0, id)], hi));
        }
        out
    }

    pub fn with_property(&self, property: Vec<LinearConstraint>) -> Result<Self> {
        VerificationProblem::new(self.network.clone(), property)
    }

    /// True iff the exact valuation for `inputs` satisfies every constraint
    /// with slack at least `-tolerance`.
    pub fn check_witness(&self, inputs: &[f64], tolerance: f64) -> Result<bool> {
        let val = self.network.evaluate(inputs)?;
        Ok(self
            .property
            .iter()
            .all(|c| c.slack(val.values()) >= -tolerance))
    }
}

#[derive(Debug, Clone)]
struct Decl {
    name: String,
    kind: NodeKind,
    bias: f64,
    preds: Vec<(String, f64)>,
}

/// Collects node declarations by name and validates them into a [`Network`].
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    decls: Vec<Decl>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(&mut self, name: &str) -> &mut Self {
        self.push(name, NodeKind::Input, 0.0, Vec::new())
    }

    pub fn linear(&mut self, name: &str, bias: f64, preds: &[(f64, &str)]) -> &mut Self {
        let preds = preds.iter().map(|&(w, s)| (s.to_string(), w)).collect();
        self.push(name, NodeKind::Linear, bias, preds)
    }

    pub fn relu(&mut self, name: &str, bias: f64, preds: &[(f64, &str)]) -> &mut Self {
        let preds = preds.iter().map(|&(w, s)| (s.to_string(), w)).collect();
        self.push(name, NodeKind::Relu, bias, preds)
    }

    pub fn maxpool(&mut self, name: &str, preds: &[&str]) -> &mut Self {
        let preds = preds.iter().map(|&s| (s.to_string(), 1.0)).collect();
        self.push(name, NodeKind::MaxPool, 0.0, preds)
    }

    fn push(&mut self, name: &str, kind: NodeKind, bias: f64, preds: Vec<(String, f64)>) -> &mut Self {
        self.decls.push(Decl { name: name.to_string(), kind, bias, preds });
        self
    }

    pub fn build(&self) -> Result<Network> {
        let mut index = BTreeMap::new();
        for (i, d) in self.decls.iter().enumerate() {
            if index.insert(d.name.as_str(), i).is_some() {
                return Err(Error::DuplicateId(d.name.clone()));
            }
        }
        let mut preds = Vec::with_capacity(self.decls.len());
        for d in &self.decls {
            let mut resolved: Vec<(NodeId, f64)> = Vec::with_capacity(d.preds.len());
            for (src, w) in &d.preds {
                let id = *index.get(src.as_str()).ok_or_else(|| Error::UnknownNode(src.clone()))?;
                if resolved.iter().any(|&(s, _)| s.0 == id) {
                    return Err(Error::InvalidNode { node: d.name.clone(), reason: "repeated source" });
                }
                resolved.push((NodeId(id), *w));
            }
            match (d.kind, resolved.is_empty()) {
                (NodeKind::Input, false) => {
                    return Err(Error::InvalidNode { node: d.name.clone(), reason: "input with incoming edges" })
                }
                (NodeKind::Input, true) => {}
                (_, true) => {
                    return Err(Error::InvalidNode { node: d.name.clone(), reason: "no incoming edges" })
                }
                _ => {}
            }
            preds.push(resolved);
        }
        if let Some(node) = find_cycle(&preds) {
            return Err(Error::Cycle(self.decls[node].name.clone()));
        }
        for (i, p) in preds.iter().enumerate() {
            if p.iter().any(|&(s, _)| s.0 >= i) {
                return Err(Error::NotTopological(self.decls[i].name.clone()));
            }
        }

        let mut has_succ = vec![false; self.decls.len()];
        for p in &preds {
            for &(s, _) in p {
                has_succ[s.0] = true;
            }
        }
        let nodes: Vec<Node> = self
            .decls
            .iter()
            .zip(preds)
            .map(|(d, preds)| Node { name: d.name.clone(), kind: d.kind, bias: d.bias, preds })
            .collect();
        let inputs = (0..nodes.len()).filter(|&i| nodes[i].kind == NodeKind::Input).map(NodeId).collect();
        let outputs = (0..nodes.len()).filter(|&i| !has_succ[i]).map(NodeId).collect();
        Ok(Network { nodes, inputs, outputs })
    }
}

/// Some node on a cycle, if the graph has one.
fn find_cycle(preds: &[Vec<(NodeId, f64)>]) -> Option<usize> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; preds.len()];
    for root in 0..preds.len() {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&(src, _)) = preds[node].get(*next) {
                *next += 1;
                match state[src.0] {
                    0 => {
                        state[src.0] = 1;
                        stack.push((src.0, 0));
                    }
                    1 => return Some(src.0),
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
            }
        }
    }
    None
}
