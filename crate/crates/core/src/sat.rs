//! CDCL engine over phase literals.
//!
//! Two watched literals, first-UIP learning, VSIDS-style activities with a
//! linear-scan pick, phase saving and Luby restarts. Learned clauses are
//! never deleted.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Not;

use crate::error::{Error, Result};
use crate::network::{Network, NodeId, NodeKind};
use crate::relaxation::{Phase, PhaseFixture};

const ACTIVITY_DECAY: f64 = 0.95;
const ACTIVITY_RESCALE: f64 = 1e100;
const RESTART_UNIT: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A literal: variable plus polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, positive: bool) -> Self {
        Lit(var.0 * 2 + u32::from(!positive))
    }

    pub fn pos(var: Var) -> Self {
        Lit::new(var, true)
    }

    pub fn neg(var: Var) -> Self {
        Lit::new(var, false)
    }

    pub fn var(self) -> Var {
        Var(self.0 / 2)
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    fn code(self) -> usize {
        self.0 as usize
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LitValue {
    True,
    False,
    Undef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Clause {
    lits: Vec<Lit>,
    learned: bool,
}

/// Index of a clause in the database.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClauseRef(usize);

/// Outcome of adding a clause mid-search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddOutcome {
    /// Stored; propagation may have new work queued.
    Added,
    /// Falsified with two or more literals at the current (backjumped) level;
    /// hand it to [`Solver::resolve_conflict`].
    Conflict(ClauseRef),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub decisions: u64,
    pub conflicts: u64,
    pub learned: u64,
    pub propagations: u64,
    pub restarts: u64,
}

#[derive(Debug, Clone)]
pub struct Solver {
    clauses: Vec<Clause>,
    watches: Vec<Vec<usize>>,
    assigns: Vec<Option<bool>>,
    level: Vec<usize>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    saved: Vec<bool>,
    seen: Vec<bool>,
    unsat: bool,
    luby_index: u64,
    conflicts_since_restart: u64,
    stats: SolverStats,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new(0)
    }
}

impl Solver {
    pub fn new(num_vars: usize) -> Self {
        let mut s = Solver {
            clauses: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            saved: Vec::new(),
            seen: Vec::new(),
            unsat: false,
            luby_index: 1,
            conflicts_since_restart: 0,
            stats: SolverStats::default(),
        };
        for _ in 0..num_vars {
            s.new_var();
        }
        s
    }

    pub fn new_var(&mut self) -> Var {
        let v = Var(self.assigns.len() as u32);
        self.assigns.push(None);
        self.level.push(0);
        self.reason.push(None);
        self.activity.push(0.0);
        self.saved.push(true);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        v
    }

    pub fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> impl Iterator<Item = &[Lit]> {
        self.clauses.iter().map(|c| c.lits.as_slice())
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// True once a root-level conflict has been found.
    pub fn is_unsat(&self) -> bool {
        self.unsat
    }

    pub fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    pub fn trail(&self) -> &[Lit] {
        &self.trail
    }

    pub fn value(&self, lit: Lit) -> LitValue {
        lit_value(&self.assigns, lit)
    }

    pub fn var_value(&self, v: Var) -> Option<bool> {
        self.assigns[v.index()]
    }

    pub fn level_of(&self, v: Var) -> usize {
        self.level[v.index()]
    }

    pub fn is_decision(&self, v: Var) -> bool {
        self.assigns[v.index()].is_some() && self.reason[v.index()].is_none() && self.level[v.index()] > 0
    }

    pub fn activity(&self, v: Var) -> f64 {
        self.activity[v.index()]
    }

    pub fn all_assigned(&self) -> bool {
        self.trail.len() == self.assigns.len()
    }

    /// Adds a clause of the original instance. Callable at any level; see
    /// [`Solver::add_clause_live`].
    pub fn add_clause(&mut self, lits: &[Lit]) -> Result<AddOutcome> {
        self.add_clause_inner(lits, false)
    }

    /// Adds a clause during search, restoring the watch invariants.
    ///
    /// A clause left unit by the current assignment backjumps to the level of
    /// its deepest false literal and propagates. A falsified clause with a
    /// single literal at its deepest level is asserting and handled the same
    /// way; otherwise the trail is cut back to that level and the clause is
    /// returned for conflict analysis. A clause falsified at level 0 makes the
    /// instance unsatisfiable.
    pub fn add_clause_live(&mut self, lits: &[Lit]) -> Result<AddOutcome> {
        self.add_clause_inner(lits, true)
    }

    fn add_clause_inner(&mut self, lits: &[Lit], learned: bool) -> Result<AddOutcome> {
        if self.unsat {
            return Err(Error::RootConflict);
        }
        let mut c: Vec<Lit> = Vec::with_capacity(lits.len());
        for &l in lits {
            if l.var().index() >= self.num_vars() {
                return Err(Error::UnknownVar(l.var().index()));
            }
            if c.contains(&!l) {
                return Ok(AddOutcome::Added);
            }
            if !c.contains(&l) {
                c.push(l);
            }
        }
        let root = |s: &Self, l: Lit| s.assigns[l.var().index()].is_some() && s.level[l.var().index()] == 0;
        if c.iter().any(|&l| root(self, l) && self.value(l) == LitValue::True) {
            return Ok(AddOutcome::Added);
        }
        c.retain(|&l| !(root(self, l) && self.value(l) == LitValue::False));
        match c.len() {
            0 => {
                self.unsat = true;
                Err(Error::RootConflict)
            }
            1 => {
                self.backtrack(0);
                let ci = self.store(c, learned);
                let l = self.clauses[ci].lits[0];
                self.enqueue(l, Some(ci));
                Ok(AddOutcome::Added)
            }
            _ => {
                let rank = |s: &Self, l: Lit| -> (u8, i64) {
                    let lvl = s.level[l.var().index()] as i64;
                    match s.value(l) {
                        LitValue::True => (0, lvl),
                        LitValue::Undef => (1, 0),
                        LitValue::False => (2, -lvl),
                    }
                };
                c.sort_by_key(|&l| rank(self, l));
                let (v0, v1) = (self.value(c[0]), self.value(c[1]));
                let lvl = |s: &Self, l: Lit| s.level[l.var().index()];
                if v1 != LitValue::False {
                    self.store(c, learned);
                    return Ok(AddOutcome::Added);
                }
                let l1 = lvl(self, c[1]);
                match v0 {
                    LitValue::True if lvl(self, c[0]) <= l1 => {
                        self.store(c, learned);
                        Ok(AddOutcome::Added)
                    }
                    LitValue::True | LitValue::Undef => {
                        self.backtrack(l1);
                        let ci = self.store(c, learned);
                        let l = self.clauses[ci].lits[0];
                        self.enqueue(l, Some(ci));
                        Ok(AddOutcome::Added)
                    }
                    LitValue::False => {
                        let l0 = lvl(self, c[0]);
                        if l1 < l0 {
                            self.backtrack(l1);
                            let ci = self.store(c, learned);
                            let l = self.clauses[ci].lits[0];
                            self.enqueue(l, Some(ci));
                            Ok(AddOutcome::Added)
                        } else {
                            // l0 > 0 here: root-false literals were removed.
                            self.backtrack(l0);
                            let ci = self.store(c, learned);
                            Ok(AddOutcome::Conflict(ClauseRef(ci)))
                        }
                    }
                }
            }
        }
    }

    fn store(&mut self, lits: Vec<Lit>, learned: bool) -> usize {
        let ci = self.clauses.len();
        if lits.len() >= 2 {
            self.watches[lits[0].code()].push(ci);
            self.watches[lits[1].code()].push(ci);
        }
        self.clauses.push(Clause { lits, learned });
        ci
    }

    fn enqueue(&mut self, lit: Lit, reason: Option<usize>) {
        let v = lit.var().index();
        debug_assert!(self.assigns[v].is_none());
        self.assigns[v] = Some(lit.is_positive());
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(lit);
    }

    /// Unit propagation to fixpoint. Returns the falsified clause on conflict.
    pub fn propagate(&mut self) -> Option<ClauseRef> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = core::mem::take(&mut self.watches[false_lit.code()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let ci = ws[i];
                i += 1;
                let lits = &mut self.clauses[ci].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                if lit_value(&self.assigns, lits[0]) == LitValue::True {
                    ws[j] = ci;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    if lit_value(&self.assigns, lits[k]) != LitValue::False {
                        lits.swap(1, k);
                        self.watches[lits[1].code()].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = ci;
                j += 1;
                let first = lits[0];
                if lit_value(&self.assigns, first) == LitValue::False {
                    conflict = Some(ci);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(ci));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
            if let Some(ci) = conflict {
                self.qhead = self.trail.len();
                return Some(ClauseRef(ci));
            }
        }
        None
    }

    /// First-UIP analysis. Returns the learned clause (asserting literal
    /// first) and the backjump level. Does not modify the trail.
    pub fn analyze_conflict(&mut self, conflict: ClauseRef) -> Result<(Vec<Lit>, usize)> {
        let current = self.decision_level();
        if current == 0 {
            self.unsat = true;
            return Err(Error::RootConflict);
        }
        let mut learnt = vec![Lit(0)];
        let mut counter = 0usize;
        let mut index = self.trail.len();
        let mut confl = conflict.0;
        let mut p: Option<Lit> = None;
        loop {
            let skip = usize::from(p.is_some());
            let lits = self.clauses[confl].lits.clone();
            for &q in &lits[skip..] {
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(q.var());
                    if self.level[v] >= current {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let lit = self.trail[index];
            let v = lit.var().index();
            self.seen[v] = false;
            counter -= 1;
            p = Some(lit);
            if counter == 0 {
                break;
            }
            confl = self.reason[v].ok_or(Error::Numeric("implied literal without reason"))?;
        }
        learnt[0] = !p.expect("at least one literal at the conflict level");
        for l in &learnt[1..] {
            self.seen[l.var().index()] = false;
        }
        let mut bj = 0;
        if learnt.len() > 1 {
            let mut best = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var().index()] > self.level[learnt[best].var().index()] {
                    best = k;
                }
            }
            learnt.swap(1, best);
            bj = self.level[learnt[1].var().index()];
        }
        self.var_inc /= ACTIVITY_DECAY;
        Ok((learnt, bj))
    }

    /// Analyses `conflict`, backjumps, stores the learned clause and asserts
    /// its first literal. `Err(RootConflict)` means the instance is UNSAT.
    pub fn resolve_conflict(&mut self, conflict: ClauseRef) -> Result<Vec<Lit>> {
        self.stats.conflicts += 1;
        self.conflicts_since_restart += 1;
        let (learnt, bj) = self.analyze_conflict(conflict)?;
        self.backtrack(bj);
        let ci = self.store(learnt.clone(), true);
        self.stats.learned += 1;
        self.enqueue(learnt[0], Some(ci));
        Ok(learnt)
    }

    fn bump(&mut self, v: Var) {
        let a = &mut self.activity[v.index()];
        *a += self.var_inc;
        if *a > ACTIVITY_RESCALE {
            for x in &mut self.activity {
                *x /= ACTIVITY_RESCALE;
            }
            self.var_inc /= ACTIVITY_RESCALE;
        }
    }

    /// Undoes every assignment above `level`, saving phases.
    pub fn backtrack(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let start = self.trail_lim[level];
        for &lit in &self.trail[start..] {
            let v = lit.var().index();
            self.saved[v] = lit.is_positive();
            self.assigns[v] = None;
            self.reason[v] = None;
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(level);
        self.qhead = self.qhead.min(start);
    }

    /// Picks the unassigned variable of highest activity (lowest index on
    /// ties) with its saved polarity, opens a new level and assigns it.
    pub fn decide(&mut self) -> Result<Lit> {
        if self.unsat {
            return Err(Error::RootConflict);
        }
        let mut best: Option<usize> = None;
        for v in 0..self.num_vars() {
            if self.assigns[v].is_none() && best.is_none_or(|b| self.activity[v] > self.activity[b]) {
                best = Some(v);
            }
        }
        let v = best.ok_or(Error::AllAssigned)?;
        let lit = Lit::new(Var(v as u32), self.saved[v]);
        self.assume(lit);
        Ok(lit)
    }

    /// Opens a new decision level with `lit` as its decision.
    pub fn assume(&mut self, lit: Lit) {
        self.stats.decisions += 1;
        self.trail_lim.push(self.trail.len());
        self.enqueue(lit, None);
    }

    /// Replaces the decision of the current level by its negation.
    pub fn flip_last_decision(&mut self) -> Option<Lit> {
        let level = self.decision_level();
        if level == 0 {
            return None;
        }
        let decision = self.trail[self.trail_lim[level - 1]];
        self.backtrack(level - 1);
        self.assume(!decision);
        Some(!decision)
    }

    /// Restarts if the Luby schedule says so. Learned clauses are kept.
    pub fn maybe_restart(&mut self) -> bool {
        if self.conflicts_since_restart < luby(self.luby_index) * RESTART_UNIT {
            return false;
        }
        self.luby_index += 1;
        self.conflicts_since_restart = 0;
        self.stats.restarts += 1;
        self.backtrack(0);
        true
    }

    /// Plain CDCL search on the clauses. `true` iff satisfiable.
    pub fn solve(&mut self) -> bool {
        if self.unsat {
            return false;
        }
        loop {
            if let Some(c) = self.propagate() {
                if self.resolve_conflict(c).is_err() {
                    return false;
                }
                continue;
            }
            if self.maybe_restart() {
                continue;
            }
            match self.decide() {
                Ok(_) => {}
                Err(Error::AllAssigned) => return true,
                Err(_) => return false,
            }
        }
    }

    /// True iff the clause set is satisfiable with `assumptions` forced.
    /// Runs on a fresh copy; `self` is untouched.
    pub fn extendable(&self, assumptions: &[Lit]) -> bool {
        if self.unsat {
            return false;
        }
        let mut fresh = Solver::new(self.num_vars());
        fresh.activity.clone_from(&self.activity);
        for c in &self.clauses {
            if fresh.add_clause(&c.lits).is_err() {
                return false;
            }
        }
        for &a in assumptions {
            if fresh.add_clause(&[a]).is_err() {
                return false;
            }
        }
        fresh.solve()
    }

    /// Number of learned clauses in the database.
    pub fn num_learned(&self) -> usize {
        self.clauses.iter().filter(|c| c.learned).count()
    }
}

fn lit_value(assigns: &[Option<bool>], lit: Lit) -> LitValue {
    match assigns[lit.var().index()] {
        None => LitValue::Undef,
        Some(b) if b == lit.is_positive() => LitValue::True,
        Some(_) => LitValue::False,
    }
}

/// The i-th term (1-based) of the Luby sequence 1 1 2 1 1 2 4 ...
pub fn luby(i: u64) -> u64 {
    let mut i = i;
    loop {
        let mut k = 1;
        while (1u64 << k) - 1 < i {
            k += 1;
        }
        if (1u64 << k) - 1 == i {
            return 1u64 << (k - 1);
        }
        i -= (1u64 << (k - 1)) - 1;
    }
}

/// Correspondence between SAT variables and node phases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseEncoding {
    var_of: BTreeMap<(NodeId, Phase), Var>,
    phase_of: Vec<(NodeId, Phase)>,
}

impl PhaseEncoding {
    pub fn var(&self, node: NodeId, phase: Phase) -> Option<Var> {
        self.var_of.get(&(node, phase)).copied()
    }

    pub fn lit(&self, node: NodeId, phase: Phase, positive: bool) -> Option<Lit> {
        self.var(node, phase).map(|v| Lit::new(v, positive))
    }

    pub fn phase(&self, var: Var) -> (NodeId, Phase) {
        self.phase_of[var.index()]
    }

    pub fn num_vars(&self) -> usize {
        self.phase_of.len()
    }

    /// Phases whose variable is true under the solver's assignment.
    pub fn fixture(&self, net: &Network, solver: &Solver) -> PhaseFixture {
        let mut f = PhaseFixture::empty(net);
        for (i, &(node, phase)) in self.phase_of.iter().enumerate() {
            if solver.var_value(Var(i as u32)) == Some(true) {
                f.set(node, phase);
            }
        }
        f
    }

    /// The positive literal of every fixed phase in `fixture`.
    pub fn fixture_lits(&self, fixture: &PhaseFixture) -> Vec<Lit> {
        fixture.iter().filter_map(|(n, p)| self.lit(n, p, true)).collect()
    }
}

/// One-hot phase encoding: two variables and two clauses per ReLU, one
/// variable per incoming edge plus at-least-one and pairwise exclusion per
/// MaxPool. The `≥ 0` variable of a ReLU precedes its `≤ 0` variable so that
/// a fresh solver branches on `≥ 0` first.
pub fn init_phase_encoding(net: &Network) -> Result<(Solver, PhaseEncoding)> {
    let mut solver = Solver::new(0);
    let mut enc = PhaseEncoding { var_of: BTreeMap::new(), phase_of: Vec::new() };
    let alloc_var = |solver: &mut Solver, enc: &mut PhaseEncoding, node: NodeId, phase: Phase| {
        let v = solver.new_var();
        enc.var_of.insert((node, phase), v);
        enc.phase_of.push((node, phase));
        v
    };
    let mut pending: Vec<Vec<Lit>> = Vec::new();
    for id in net.ids() {
        let node = net.node(id);
        match node.kind {
            NodeKind::Relu => {
                let active = alloc_var(&mut solver, &mut enc, id, Phase::Active);
                let inactive = alloc_var(&mut solver, &mut enc, id, Phase::Inactive);
                pending.push(vec![Lit::pos(inactive), Lit::pos(active)]);
                pending.push(vec![Lit::neg(inactive), Lit::neg(active)]);
            }
            NodeKind::MaxPool => {
                let vars: Vec<Var> =
                    (0..node.preds.len()).map(|e| alloc_var(&mut solver, &mut enc, id, Phase::Edge(e))).collect();
                pending.push(vars.iter().map(|&v| Lit::pos(v)).collect());
                for a in 0..vars.len() {
                    for b in a + 1..vars.len() {
                        pending.push(vec![Lit::neg(vars[a]), Lit::neg(vars[b])]);
                    }
                }
            }
            NodeKind::Input | NodeKind::Linear => {}
        }
    }
    for c in pending {
        solver.add_clause(&c)?;
    }
    Ok((solver, enc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;
    use proptest::prelude::*;

    fn lit(v: i32) -> Lit {
        Lit::new(Var(v.unsigned_abs() - 1), v > 0)
    }

    fn solver_with(n: usize, clauses: &[&[i32]]) -> Solver {
        let mut s = Solver::new(n);
        for c in clauses {
            let lits: Vec<Lit> = c.iter().map(|&x| lit(x)).collect();
            let _ = s.add_clause(&lits);
        }
        s
    }

    fn satisfies(clauses: &[Vec<Lit>], assignment: u32) -> bool {
        clauses.iter().all(|c| c.iter().any(|l| ((assignment >> l.var().0) & 1 == 1) == l.is_positive()))
    }

    fn brute_sat(n: usize, clauses: &[Vec<Lit>], fixed: &[Lit]) -> bool {
        (0..1u32 << n).any(|a| satisfies(clauses, a) && fixed.iter().all(|l| ((a >> l.var().0) & 1 == 1) == l.is_positive()))
    }

    /// Reference propagator: rescans every clause until nothing changes.
    fn naive_propagate(n: usize, clauses: &[Vec<Lit>], start: &[Lit]) -> Option<Vec<Option<bool>>> {
        let mut a: Vec<Option<bool>> = vec![None; n];
        for l in start {
            a[l.var().index()] = Some(l.is_positive());
        }
        loop {
            let mut changed = false;
            for c in clauses {
                let vals: Vec<LitValue> = c.iter().map(|&l| lit_value(&a, l)).collect();
                if vals.contains(&LitValue::True) {
                    continue;
                }
                let mut undef: Vec<Lit> = c.iter().zip(&vals).filter(|(_, v)| **v == LitValue::Undef).map(|(l, _)| *l).collect();
                undef.sort();
                undef.dedup();
                match undef.len() {
                    0 => return None,
                    1 => {
                        a[undef[0].var().index()] = Some(undef[0].is_positive());
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return Some(a);
            }
        }
    }

    fn random_cnf(n: usize, m: usize, seed: u64) -> Vec<Vec<Lit>> {
        use rand::Rng;
        let mut rng = crate::testutil::rng(seed);
        (0..m)
            .map(|_| {
                let k = rng.random_range(1..=3);
                (0..k).map(|_| Lit::new(Var(rng.random_range(0..n as u32)), rng.random_bool(0.5))).collect()
            })
            .collect()
    }

    #[test]
    fn unit_propagation_examples() {
        let mut s = solver_with(2, &[&[1, 2], &[-1]]);
        assert_eq!(s.propagate(), None);
        assert_eq!(s.value(lit(-1)), LitValue::True);
        assert_eq!(s.value(lit(2)), LitValue::True);

        let mut s = Solver::new(1);
        s.add_clause(&[lit(1)]).unwrap();
        assert_eq!(s.add_clause(&[lit(-1)]), Err(Error::RootConflict));
        assert!(s.is_unsat());
    }

    #[test]
    fn single_decision_conflict_learns_negation() {
        let mut s = solver_with(3, &[&[-1, 2], &[-1, 3], &[-2, -3]]);
        assert_eq!(s.propagate(), None);
        s.assume(lit(1));
        let c = s.propagate().unwrap();
        let (learnt, bj) = s.analyze_conflict(c).unwrap();
        assert_eq!(learnt, vec![lit(-1)]);
        assert_eq!(bj, 0);
    }

    #[test]
    fn root_conflict_is_an_error() {
        let mut s = Solver::new(2);
        s.add_clause(&[lit(1), lit(2)]).unwrap();
        s.add_clause(&[lit(1), lit(-2)]).unwrap();
        s.add_clause(&[lit(-1), lit(2)]).unwrap();
        let _ = s.add_clause(&[lit(-1)]);
        let c = s.propagate().unwrap();
        assert_eq!(s.analyze_conflict(c), Err(Error::RootConflict));
    }

    #[test]
    fn fresh_decision_is_lowest_positive() {
        let mut s = Solver::new(10);
        assert_eq!(s.decide().unwrap(), lit(1));
        let mut s = Solver::new(10);
        s.bump(Var(7));
        assert_eq!(s.decide().unwrap(), Lit::pos(Var(7)));
        let mut s = Solver::new(0);
        assert_eq!(s.decide(), Err(Error::AllAssigned));
    }

    #[test]
    fn conflict_bumps_steer_next_decision() {
        // Deciding x1 then x2 conflicts through x8 (var 7); the learned
        // clause bumps var 7 among others, and after backjumping the
        // highest-activity free variable is picked.
        let mut s = solver_with(10, &[&[-1, -2, 8], &[-1, -2, -8]]);
        s.assume(lit(1));
        assert_eq!(s.propagate(), None);
        s.assume(lit(2));
        let c = s.propagate().unwrap();
        s.resolve_conflict(c).unwrap();
        assert_eq!(s.propagate(), None);
        assert!(s.activity(Var(7)) > 0.0);
        let d = s.decide().unwrap();
        let best = (0..10).filter(|&v| s.var_value(Var(v)).is_none() || Var(v) == d.var()).map(|v| s.activity(Var(v))).fold(0.0, f64::max);
        assert_eq!(s.activity(d.var()), best);
    }

    #[test]
    fn decisions_are_deterministic() {
        let clauses = random_cnf(12, 50, 3);
        let run = || {
            let mut s = Solver::new(12);
            for c in &clauses {
                let _ = s.add_clause(c);
            }
            let sat = s.solve();
            (sat, s.trail().to_vec(), s.stats())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn extendable_examples() {
        let s = solver_with(2, &[&[-1, 2], &[-2]]);
        assert!(!s.extendable(&[lit(1)]));
        assert!(s.extendable(&[]));
    }

    #[test]
    fn encoding_counts() {
        let mut b = NetworkBuilder::new();
        b.input("x")
            .relu("r1", 0.0, &[(1.0, "x")])
            .relu("r2", 0.0, &[(1.0, "x")])
            .maxpool("m", &["r1", "r2"]);
        let net = b.build().unwrap();
        let (s, enc) = init_phase_encoding(&net).unwrap();
        assert_eq!(s.num_vars(), 6);
        assert_eq!(s.num_clauses(), 6);
        assert_eq!(enc.phase(Var(0)), (NodeId(1), Phase::Active));
        assert_eq!(enc.phase(Var(1)), (NodeId(1), Phase::Inactive));

        let mut b = NetworkBuilder::new();
        b.input("a").input("b").input("c").input("d").maxpool("m", &["a", "b", "c", "d"]);
        let (s, _) = init_phase_encoding(&b.build().unwrap()).unwrap();
        assert_eq!(s.num_clauses(), 7);

        let mut b = NetworkBuilder::new();
        b.input("a").maxpool("m", &["a"]);
        let net = b.build().unwrap();
        let (mut s, enc) = init_phase_encoding(&net).unwrap();
        assert_eq!(s.propagate(), None);
        let v = enc.var(NodeId(1), Phase::Edge(0)).unwrap();
        assert_eq!(s.var_value(v), Some(true));
        assert_eq!(s.level_of(v), 0);
    }

    #[test]
    fn complete_assignments_are_one_hot() {
        let mut b = NetworkBuilder::new();
        b.input("x")
            .relu("r1", 0.0, &[(1.0, "x")])
            .relu("r2", 0.0, &[(1.0, "x")])
            .relu("r3", 0.0, &[(1.0, "x")])
            .maxpool("m", &["r1", "r2", "r3"]);
        let net = b.build().unwrap();
        let (mut s, enc) = init_phase_encoding(&net).unwrap();
        assert!(s.solve());
        let f = enc.fixture(&net, &s);
        assert!(f.is_complete(&net));
        assert_eq!(f.get(NodeId(1)), Some(Phase::Active));
        for id in net.ids().filter(|&id| net.node(id).kind.is_piecewise()) {
            let trues = (0..enc.num_vars())
                .filter(|&v| enc.phase(Var(v as u32)).0 == id && s.var_value(Var(v as u32)) == Some(true))
                .count();
            assert_eq!(trues, 1);
        }
    }

    #[test]
    fn live_clause_unit_backjumps() {
        let mut s = Solver::new(4);
        s.assume(lit(1));
        s.assume(lit(2));
        s.assume(lit(3));
        // ¬1 ∨ 4: unit at level 1 although we sit at level 3.
        assert_eq!(s.add_clause_live(&[lit(-1), lit(4)]).unwrap(), AddOutcome::Added);
        assert_eq!(s.decision_level(), 1);
        assert_eq!(s.value(lit(4)), LitValue::True);
        assert_eq!(s.level_of(Var(3)), 1);
    }

    #[test]
    fn live_clause_conflict_at_max_level() {
        let mut s = Solver::new(4);
        s.assume(lit(1));
        s.assume(lit(2));
        s.add_clause_live(&[lit(-2), lit(3)]).unwrap();
        assert_eq!(s.propagate(), None);
        s.assume(lit(4));
        let out = s.add_clause_live(&[lit(-2), lit(-3)]).unwrap();
        let AddOutcome::Conflict(c) = out else { panic!("{out:?}") };
        assert_eq!(s.decision_level(), 2);
        let learnt = s.resolve_conflict(c).unwrap();
        assert_eq!(learnt, vec![lit(-2)]);
        assert_eq!(s.decision_level(), 0);
        assert_eq!(s.propagate(), None);
        assert_eq!(s.value(lit(-2)), LitValue::True);
    }

    #[test]
    fn live_clause_asserting_and_root() {
        let mut s = Solver::new(3);
        s.assume(lit(1));
        s.assume(lit(2));
        s.assume(lit(3));
        s.add_clause_live(&[lit(-1), lit(-3)]).unwrap();
        assert_eq!(s.decision_level(), 1);
        assert_eq!(s.value(lit(-3)), LitValue::True);

        let mut s = Solver::new(1);
        s.add_clause(&[lit(1)]).unwrap();
        assert_eq!(s.propagate(), None);
        assert_eq!(s.add_clause_live(&[lit(-1)]), Err(Error::RootConflict));
    }

    #[test]
    fn flip_replaces_decision() {
        let mut s = Solver::new(2);
        s.assume(lit(1));
        s.assume(lit(2));
        assert_eq!(s.flip_last_decision(), Some(lit(-2)));
        assert_eq!(s.decision_level(), 2);
        assert_eq!(s.value(lit(2)), LitValue::False);
        assert_eq!(s.value(lit(1)), LitValue::True);
    }

    #[test]
    fn luby_prefix() {
        let seq: Vec<u64> = (1..=15).map(luby).collect();
        assert_eq!(seq, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn propagation_matches_naive_fixpoint(seed in 0u64..100_000, m in 5usize..40) {
            let n = 10;
            let clauses = random_cnf(n, m, seed);
            let start = random_cnf(n, 2, seed ^ 0xdead).concat();
            let mut s = Solver::new(n);
            let mut root_conflict = false;
            for c in &clauses {
                if s.add_clause(c).is_err() { root_conflict = true; }
            }
            let mut consistent = !root_conflict;
            if consistent {
                for &l in &start {
                    match s.value(l) {
                        LitValue::False => { consistent = false; break; }
                        LitValue::True => {}
                        LitValue::Undef => s.assume(l),
                    }
                }
            }
            let reference = naive_propagate(n, &clauses, s.trail());
            if !consistent {
                return Ok(());
            }
            let got = s.propagate();
            match reference {
                None => prop_assert!(got.is_some()),
                Some(a) => {
                    prop_assert!(got.is_none());
                    for (v, &expected) in a.iter().enumerate() {
                        prop_assert_eq!(s.var_value(Var(v as u32)), expected);
                    }
                }
            }
        }

        #[test]
        fn learned_clauses_are_implied(seed in 0u64..100_000) {
            let n = 12;
            let clauses = random_cnf(n, 45, seed);
            let mut s = Solver::new(n);
            for c in &clauses {
                let _ = s.add_clause(c);
            }
            let sat = s.solve();
            prop_assert_eq!(sat, brute_sat(n, &clauses, &[]));
            for c in s.clauses.iter().filter(|c| c.learned) {
                // Implied iff clauses ∧ ¬c is unsatisfiable.
                let neg: Vec<Lit> = c.lits.iter().map(|&l| !l).collect();
                prop_assert!(!brute_sat(n, &clauses, &neg));
            }
            if sat {
                let a: u32 = (0..n).map(|v| u32::from(s.var_value(Var(v as u32)) == Some(true)) << v).sum();
                prop_assert!(satisfies(&clauses, a));
            }
        }

        #[test]
        fn extendable_matches_truth_table(seed in 0u64..100_000) {
            let n = 14;
            let clauses = random_cnf(n, 40, seed);
            let assumptions: Vec<Lit> = random_cnf(n, 1, seed.wrapping_mul(31)).concat();
            let mut s = Solver::new(n);
            for c in &clauses {
                let _ = s.add_clause(c);
            }
            let expected = brute_sat(n, &clauses, &assumptions);
            prop_assert_eq!(s.extendable(&assumptions), expected);
        }

        #[test]
        fn restarts_preserve_status(seed in 0u64..100_000) {
            let n = 12;
            let clauses = random_cnf(n, 50, seed);
            let mut plain = Solver::new(n);
            let mut eager = Solver::new(n);
            for c in &clauses {
                let _ = plain.add_clause(c);
                let _ = eager.add_clause(c);
            }
            let a = plain.solve();
            let mut b = None;
            // Restart after every conflict.
            while b.is_none() {
                if let Some(c) = eager.propagate() {
                    if eager.resolve_conflict(c).is_err() { b = Some(false); }
                    eager.backtrack(0);
                    continue;
                }
                    match eager.decide() {
                    Err(Error::AllAssigned) => b = Some(true),
                    Err(_) => b = Some(false),
                    Ok(_) => {}
                }
            }
            prop_assert_eq!(Some(a), b);
        }
    }
}
