//! The search loop: SAT steps over phase literals, interval inference and
//! LP feasibility checks, interleaved until the phase CNF is refuted or a
//! complete phase assignment is found feasible.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fixture::{check_feasibility, FeasibilityReport, FeasibleCache, FixtureCounters, InferredClause, PhaseSet, CACHE_CAPACITY};
use crate::inference::infer_node_phases;
use crate::network::{Valuation, VerificationProblem};
use crate::relaxation::{build_relaxation, compute_initial_bounds, refine_bounds, Phase};
use crate::sat::{init_phase_encoding, AddOutcome, Lit, LitValue, PhaseEncoding, Solver};
use crate::SAFETY_MARGIN;

/// Elapsed wall time since the start of a run, in seconds.
pub trait Clock {
    fn elapsed_secs(&self) -> f64;
}

/// A clock that never advances; time budgets never expire.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_secs(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Seconds; checked once per loop iteration against the clock.
    pub time_budget: Option<f64>,
    pub conflict_budget: Option<u64>,
    pub cache: bool,
    pub refine: bool,
    pub inference: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config { time_budget: Some(3600.0), conflict_budget: None, cache: true, refine: true, inference: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    pub lp_solves: u64,
    pub refine_lp_solves: u64,
    pub search_lp_solves: u64,
    pub refine_sweeps: u64,
    pub conflicts: u64,
    pub decisions: u64,
    pub restarts: u64,
    pub learned_clauses: u64,
    pub inference_clauses: u64,
    pub conflict_clauses: u64,
    pub lp_inferred_clauses: u64,
    pub cache_hits: u64,
    pub iterations: u64,
    /// Loop iterations that changed nothing; always zero.
    pub idle_iterations: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Satisfiable { inputs: Vec<f64>, valuation: Valuation },
    Unsatisfiable,
}

impl Status {
    pub fn is_sat(&self) -> bool {
        matches!(self, Status::Satisfiable { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationResult {
    pub status: Status,
    pub stats: Stats,
}

pub fn verify(problem: &VerificationProblem, config: &Config) -> Result<VerificationResult> {
    verify_with_clock(problem, config, &NoClock)
}

struct Search {
    enc: PhaseEncoding,
    solver: Solver,
    extra: VecDeque<Vec<Lit>>,
    seen: BTreeSet<Vec<Lit>>,
    consumed: u64,
}

impl Search {
    fn satisfied(&self, clause: &[Lit]) -> bool {
        clause.iter().any(|&l| self.solver.value(l) == LitValue::True)
    }

    /// Queues `clause` unless it is satisfied or was queued before.
    fn queue(&mut self, mut clause: Vec<Lit>) -> bool {
        if self.satisfied(&clause) {
            return false;
        }
        clause.sort();
        if !self.seen.insert(clause.clone()) {
            return false;
        }
        self.extra.push_back(clause);
        true
    }

    fn blame_clause(&self, blamed: &PhaseSet) -> Vec<Lit> {
        blamed.iter().filter_map(|&(n, p)| self.enc.lit(n, p, false)).collect()
    }

    fn inferred_lits(&self, c: &InferredClause) -> Vec<Lit> {
        let mut lits = self.blame_clause(&c.premise);
        lits.extend(c.active.iter().filter_map(|&n| self.enc.lit(n, Phase::Active, true)));
        lits
    }

    /// Unit propagation and conflict handling, merging queued clauses one at
    /// a time. `Ok(false)` means the CNF is refuted.
    fn sat_steps(&mut self) -> Result<bool> {
        loop {
            if let Some(c) = self.solver.propagate() {
                match self.solver.resolve_conflict(c) {
                    Ok(_) => continue,
                    Err(Error::RootConflict) => return Ok(false),
                    Err(e) => return Err(e),
                }
            }
            let Some(clause) = self.extra.pop_front() else { break };
            self.consumed += 1;
            match self.solver.add_clause_live(&clause) {
                Ok(AddOutcome::Added) => {}
                Ok(AddOutcome::Conflict(c)) => match self.solver.resolve_conflict(c) {
                    Ok(_) => {}
                    Err(Error::RootConflict) => return Ok(false),
                    Err(e) => return Err(e),
                },
                Err(Error::RootConflict) => return Ok(false),
                Err(e) => return Err(e),
            }
        }
        if self.solver.maybe_restart() {
            return self.sat_steps();
        }
        Ok(true)
    }

    fn fingerprint(&self) -> (usize, Option<Lit>, usize, u64, usize) {
        (
            self.solver.trail().len(),
            self.solver.trail().last().copied(),
            self.solver.num_clauses(),
            self.consumed,
            self.extra.len(),
        )
    }
}

pub fn verify_with_clock(problem: &VerificationProblem, config: &Config, clock: &dyn Clock) -> Result<VerificationResult> {
    let net = problem.network();
    let mut stats = Stats::default();
    let finish = |status: Status, mut stats: Stats| {
        stats.lp_solves = stats.refine_lp_solves + stats.search_lp_solves;
        stats.wall_time_secs = clock.elapsed_secs();
        Ok(VerificationResult { status, stats })
    };
    if problem.input_box().iter().any(|&(lo, hi)| lo > hi) {
        return finish(Status::Unsatisfiable, stats);
    }

    let mut bounds = compute_initial_bounds(problem);
    if config.refine {
        let r = refine_bounds(problem, &bounds)?;
        stats.refine_lp_solves = r.report.lp_solves as u64;
        stats.refine_sweeps = r.report.sweep_changes.len() as u64;
        match r.bounds {
            Some(b) => bounds = b,
            None => return finish(Status::Unsatisfiable, stats),
        }
    }
    let mut relax = build_relaxation(problem, &bounds);
    let (solver, enc) = match init_phase_encoding(net) {
        Ok(x) => x,
        Err(Error::RootConflict) => return finish(Status::Unsatisfiable, stats),
        Err(e) => return Err(e),
    };
    let mut search = Search { enc, solver, extra: VecDeque::new(), seen: BTreeSet::new(), consumed: 0 };
    let mut cache = FeasibleCache::new(if config.cache { CACHE_CAPACITY } else { 0 });
    let mut counters = FixtureCounters::default();

    let sync = |stats: &mut Stats, search: &Search, counters: &FixtureCounters| {
        let s = search.solver.stats();
        stats.conflicts = s.conflicts;
        stats.decisions = s.decisions;
        stats.restarts = s.restarts;
        stats.learned_clauses = s.learned;
        stats.search_lp_solves = counters.lp_solves;
        stats.cache_hits = counters.cache_hits;
        stats.conflict_clauses = counters.conflict_clauses;
        stats.lp_inferred_clauses = counters.inferred_clauses;
    };

    loop {
        stats.iterations += 1;
        if let Some(limit) = config.time_budget {
            if clock.elapsed_secs() > limit {
                return Err(Error::Timeout);
            }
        }
        if let Some(limit) = config.conflict_budget {
            if search.solver.stats().conflicts >= limit {
                return Err(Error::Timeout);
            }
        }
        let before = search.fingerprint();

        if !search.sat_steps()? {
            sync(&mut stats, &search, &counters);
            return finish(Status::Unsatisfiable, stats);
        }
        let fixture = search.enc.fixture(net, &search.solver);

        if config.inference {
            let mut queued = false;
            for clause in infer_node_phases(net, &bounds, &fixture, &search.enc) {
                if search.queue(clause) {
                    stats.inference_clauses += 1;
                    queued = true;
                }
            }
            if queued {
                continue;
            }
        }

        let complete = search.solver.all_assigned() && fixture.is_complete(net);
        // A complete fixture makes the LP exact; cached answers come from
        // partial fixtures, so bypass the cache there.
        let mut no_cache = FeasibleCache::new(0);
        let report = check_feasibility(
            net,
            &mut relax,
            &bounds,
            &fixture,
            if complete { &mut no_cache } else { &mut cache },
            &mut counters,
        )?;
        let mut queued = false;
        match report {
            FeasibilityReport::Infeasible { blamed } => {
                let clause = search.blame_clause(&blamed);
                queued = search.queue(clause);
                if !queued {
                    return Err(Error::Numeric("repeated conflict clause"));
                }
            }
            FeasibilityReport::Feasible { values, inferred, .. } => {
                if let Some(c) = inferred {
                    let lits = search.inferred_lits(&c);
                    queued = search.queue(lits);
                }
                if !queued && complete {
                    let inputs: Vec<f64> = net.inputs().iter().map(|i| values[i.0]).collect();
                    if !problem.check_witness(&inputs, SAFETY_MARGIN)? {
                        return Err(Error::Numeric("witness fails exact evaluation"));
                    }
                    let valuation = net.evaluate(&inputs)?;
                    sync(&mut stats, &search, &counters);
                    return finish(Status::Satisfiable { inputs, valuation }, stats);
                }
            }
        }
        if !queued {
            search.solver.decide()?;
            if !search.solver.extendable(search.solver.trail()) {
                search.solver.flip_last_decision();
            }
        }
        sync(&mut stats, &search, &counters);
        if search.fingerprint() == before {
            stats.idle_iterations += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{LinearConstraint, NetworkBuilder, NodeId};
    use crate::oracle::brute_force_oracle;
    use crate::testutil;
    use alloc::vec;
    use proptest::prelude::*;

    fn relu_problem(extra: Vec<LinearConstraint>) -> VerificationProblem {
        let mut b = NetworkBuilder::new();
        b.input("x").relu("y", 0.0, &[(1.0, "x")]);
        let x = NodeId(0);
        let mut prop = vec![LinearConstraint::at_least(vec![(1.0, x)], -1.0), LinearConstraint::at_most(vec![(1.0, x)], 1.0)];
        prop.extend(extra);
        VerificationProblem::new(b.build().unwrap(), prop).unwrap()
    }

    #[test]
    fn trivial_unsat() {
        let p = relu_problem(vec![
            LinearConstraint::at_most(vec![(1.0, NodeId(0))], -0.5),
            LinearConstraint::at_least(vec![(1.0, NodeId(1))], 0.5),
        ]);
        let r = verify(&p, &Config::default()).unwrap();
        assert_eq!(r.status, Status::Unsatisfiable);
        assert_eq!(brute_force_oracle(&p).unwrap().witness, None);
    }

    #[test]
    fn trivial_sat() {
        let p = relu_problem(vec![LinearConstraint::at_least(vec![(1.0, NodeId(1))], 0.5)]);
        for config in [Config::default(), Config { refine: false, inference: false, cache: false, ..Config::default() }] {
            let r = verify(&p, &config).unwrap();
            let Status::Satisfiable { inputs, .. } = r.status else { panic!() };
            assert!(inputs[0].max(0.0) >= 0.4999);
        }
    }

    #[test]
    fn empty_box_is_unsat() {
        let mut b = NetworkBuilder::new();
        b.input("x").relu("y", 0.0, &[(1.0, "x")]);
        let x = NodeId(0);
        let p = VerificationProblem::new(
            b.build().unwrap(),
            vec![LinearConstraint::at_least(vec![(1.0, x)], 1.0), LinearConstraint::at_most(vec![(1.0, x)], 0.0)],
        )
        .unwrap();
        assert_eq!(verify(&p, &Config::default()).unwrap().status, Status::Unsatisfiable);
    }

    #[test]
    fn conflict_budget_times_out() {
        // A budget of zero trips before the first iteration's work.
        let p = relu_problem(vec![LinearConstraint::at_least(vec![(1.0, NodeId(1))], 0.5)]);
        let config = Config { conflict_budget: Some(0), ..Config::default() };
        assert_eq!(verify(&p, &config), Err(Error::Timeout));
    }

    struct Expired;
    impl Clock for Expired {
        fn elapsed_secs(&self) -> f64 {
            1e9
        }
    }

    #[test]
    fn time_budget_times_out() {
        let p = relu_problem(vec![LinearConstraint::at_least(vec![(1.0, NodeId(1))], 0.5)]);
        assert_eq!(verify_with_clock(&p, &Config::default(), &Expired), Err(Error::Timeout));
        let unlimited = Config { time_budget: None, ..Config::default() };
        assert!(verify_with_clock(&p, &unlimited, &Expired).unwrap().status.is_sat());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]

        #[test]
        fn agrees_with_oracle(seed in 0u64..100_000) {
            let problem = testutil::random_problem(seed);
            let expected = brute_force_oracle(&problem).unwrap().witness.is_some();
            let r = verify(&problem, &Config::default()).unwrap();
            prop_assert_eq!(r.status.is_sat(), expected);
            prop_assert_eq!(r.stats.idle_iterations, 0);
            if let Status::Satisfiable { inputs, .. } = &r.status {
                prop_assert!(problem.check_witness(inputs, 1e-4).unwrap());
            }
            let ablated = Config { cache: false, inference: false, refine: false, ..Config::default() };
            prop_assert_eq!(verify(&problem, &ablated).unwrap().status.is_sat(), expected);
        }

        #[test]
        fn deterministic(seed in 0u64..100_000) {
            let problem = testutil::random_problem(seed);
            let a = verify(&problem, &Config::default()).unwrap();
            let b = verify(&problem, &Config::default()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
