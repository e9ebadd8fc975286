//! Serializable mirrors of engine results for `--json` output.

use serde::Serialize;

use nnverify_core::{Stats, Status, VerificationProblem};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StatsReport {
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
    pub idle_iterations: u64,
    pub wall_time_secs: f64,
}

impl From<&Stats> for StatsReport {
    fn from(s: &Stats) -> Self {
        StatsReport {
            lp_solves: s.lp_solves,
            refine_lp_solves: s.refine_lp_solves,
            search_lp_solves: s.search_lp_solves,
            refine_sweeps: s.refine_sweeps,
            conflicts: s.conflicts,
            decisions: s.decisions,
            restarts: s.restarts,
            learned_clauses: s.learned_clauses,
            inference_clauses: s.inference_clauses,
            conflict_clauses: s.conflict_clauses,
            lp_inferred_clauses: s.lp_inferred_clauses,
            cache_hits: s.cache_hits,
            iterations: s.iterations,
            idle_iterations: s.idle_iterations,
            wall_time_secs: s.wall_time_secs,
        }
    }
}

impl StatsReport {
    /// `name value` pairs in declaration order.
    pub fn lines(&self) -> Vec<(&'static str, String)> {
        vec![
            ("lp_solves", self.lp_solves.to_string()),
            ("refine_lp_solves", self.refine_lp_solves.to_string()),
            ("search_lp_solves", self.search_lp_solves.to_string()),
            ("refine_sweeps", self.refine_sweeps.to_string()),
            ("conflicts", self.conflicts.to_string()),
            ("decisions", self.decisions.to_string()),
            ("restarts", self.restarts.to_string()),
            ("learned_clauses", self.learned_clauses.to_string()),
            ("inference_clauses", self.inference_clauses.to_string()),
            ("conflict_clauses", self.conflict_clauses.to_string()),
            ("lp_inferred_clauses", self.lp_inferred_clauses.to_string()),
            ("cache_hits", self.cache_hits.to_string()),
            ("iterations", self.iterations.to_string()),
            ("idle_iterations", self.idle_iterations.to_string()),
            ("wall_time_secs", format!("{:.6}", self.wall_time_secs)),
        ]
    }
}

/// Outcome of one decision query.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct VerdictReport {
    /// `"sat"` or `"unsat"`.
    pub status: &'static str,
    pub witness: Option<Vec<f64>>,
    /// Output values at the witness, in output order.
    pub outputs: Option<Vec<f64>>,
    pub stats: Option<StatsReport>,
    pub oracle_agreement: Option<bool>,
}

impl VerdictReport {
    pub fn new(problem: &VerificationProblem, status: &Status) -> Self {
        match status {
            Status::Satisfiable { inputs, valuation } => VerdictReport {
                status: "sat",
                witness: Some(inputs.clone()),
                outputs: Some(problem.network().outputs().iter().map(|&o| valuation.value(o)).collect()),
                stats: None,
                oracle_agreement: None,
            },
            Status::Unsatisfiable => {
                VerdictReport { status: "unsat", witness: None, outputs: None, stats: None, oracle_agreement: None }
            }
        }
    }
}
