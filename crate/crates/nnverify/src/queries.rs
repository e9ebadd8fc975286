//! Robustness queries built on top of a base problem's network and input box.
//!
//! Misclassification is encoded as `y_j − y_b ≥ 0`, a non-strict
//! inequality, so ties count as misclassified. A disjunction over competitor
//! classes is split into one query per class.

use nnverify_core::{
    verify_with_clock, Clock, Config, LinearConstraint, NodeId, Stats, Status, VerificationProblem,
    VerificationResult,
};

use crate::error::{Error, Result};

fn non_negative(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

fn outputs(problem: &VerificationProblem) -> &[NodeId] {
    problem.network().outputs()
}

fn check_class(problem: &VerificationProblem, class: usize, what: &str) -> Result<()> {
    let m = outputs(problem).len();
    if class >= m {
        return Err(Error::Query(format!("{what} {class} is out of range for {m} outputs")));
    }
    Ok(())
}

fn check_arity(problem: &VerificationProblem, point: &[f64]) -> Result<()> {
    let n = problem.network().inputs().len();
    if point.len() != n {
        return Err(Error::Query(format!("base point has {} entries but the network has {n} inputs", point.len())));
    }
    Ok(())
}

/// Class of `base`, checked against `expected` when given.
fn base_class(problem: &VerificationProblem, base: &[f64], expected: Option<usize>) -> Result<usize> {
    let actual = problem.network().classify(base)?;
    match expected {
        Some(e) if e != actual => Err(Error::MisclassifiedBase { expected: e, actual }),
        _ => Ok(actual),
    }
}

/// `y_a − y_b ≥ rhs`.
fn output_gap(problem: &VerificationProblem, a: usize, b: usize, rhs: f64) -> LinearConstraint {
    let out = outputs(problem);
    LinearConstraint::at_least(vec![(1.0, out[a]), (-1.0, out[b])], rhs)
}

fn box_rows(problem: &VerificationProblem, bounds: &[(f64, f64)]) -> Vec<LinearConstraint> {
    let mut rows = Vec::with_capacity(2 * bounds.len());
    for (&id, &(lo, hi)) in problem.network().inputs().iter().zip(bounds) {
        rows.push(LinearConstraint::at_least(vec![(1.0, id)], lo));
        rows.push(LinearConstraint::at_most(vec![(1.0, id)], hi));
    }
    rows
}

/// Coordinates of a row-major `width × height` grid lying within `border`
/// cells of its edge.
pub fn border_coordinates(width: usize, height: usize, border: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for r in 0..height {
        for c in 0..width {
            if r < border || c < border || r + border >= height || c + border >= width {
                out.push(r * width + c);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginQuery {
    pub base: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    /// Bisection stops once the bracket is no wider than this.
    pub precision: f64,
    /// Coordinates pinned to their base value.
    pub frozen: Vec<usize>,
    /// Class the base point must have; inferred when `None`.
    pub expected_class: Option<usize>,
}

impl MarginQuery {
    pub fn new(base: Vec<f64>) -> Self {
        MarginQuery { base, lo: 0.0, hi: 0.05, precision: 0.002, frozen: Vec::new(), expected_class: None }
    }

    fn validate(&self, problem: &VerificationProblem) -> Result<()> {
        check_arity(problem, &self.base)?;
        if !(self.lo >= 0.0 && self.lo < self.hi && self.hi.is_finite()) {
            return Err(Error::Query(format!("need 0 ≤ lo < hi, got [{}, {}]", self.lo, self.hi)));
        }
        if !(self.precision.is_finite() && self.precision > 0.0) {
            return Err(Error::Query("precision must be positive".into()));
        }
        if let Some(&i) = self.frozen.iter().find(|&&i| i >= self.base.len()) {
            return Err(Error::Query(format!("frozen coordinate {i} is out of range")));
        }
        for (i, (&x, &(lo, hi))) in self.base.iter().zip(problem.input_box()).enumerate() {
            if x < lo || x > hi {
                return Err(Error::Query(format!("base coordinate {i} = {x} lies outside [{lo}, {hi}]")));
            }
        }
        if let Some(c) = self.expected_class {
            check_class(problem, c, "class")?;
        }
        Ok(())
    }
}

/// The property asking whether some point within `epsilon` of the base (and
/// inside the input box) scores `competitor` at least as high as `class`.
pub fn margin_problem(
    problem: &VerificationProblem,
    query: &MarginQuery,
    epsilon: f64,
    class: usize,
    competitor: usize,
) -> Result<VerificationProblem> {
    let bounds: Vec<(f64, f64)> = query
        .base
        .iter()
        .zip(problem.input_box())
        .enumerate()
        .map(|(i, (&x, &(lo, hi)))| {
            if query.frozen.contains(&i) {
                (x, x)
            } else {
                ((x - epsilon).max(lo), (x + epsilon).min(hi))
            }
        })
        .collect();
    let mut property = box_rows(problem, &bounds);
    property.push(output_gap(problem, competitor, class, 0.0));
    Ok(problem.with_property(property)?)
}

/// One tested radius.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginProbe {
    pub epsilon: f64,
    pub robust: bool,
    /// Competitor class and input that beat the base class, if not robust.
    pub counterexample: Option<(usize, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginOutcome {
    pub class: usize,
    /// Largest radius found robust; `None` if even `lo` is not robust.
    pub epsilon: Option<f64>,
    pub robust_at_hi: bool,
    /// Final bracket `[robust, not robust]`.
    pub bracket: (f64, f64),
    /// Every radius tested, in order.
    pub probes: Vec<MarginProbe>,
    pub verify_calls: usize,
    pub stats: Stats,
}

fn add_stats(total: &mut Stats, s: &Stats) {
    total.lp_solves += s.lp_solves;
    total.refine_lp_solves += s.refine_lp_solves;
    total.search_lp_solves += s.search_lp_solves;
    total.refine_sweeps += s.refine_sweeps;
    total.conflicts += s.conflicts;
    total.decisions += s.decisions;
    total.restarts += s.restarts;
    total.learned_clauses += s.learned_clauses;
    total.inference_clauses += s.inference_clauses;
    total.conflict_clauses += s.conflict_clauses;
    total.lp_inferred_clauses += s.lp_inferred_clauses;
    total.cache_hits += s.cache_hits;
    total.iterations += s.iterations;
    total.idle_iterations += s.idle_iterations;
    total.wall_time_secs += s.wall_time_secs;
}

/// Bisects for the largest radius at which no competitor class can reach the
/// base class's score. Competitor queries run sequentially.
pub fn margin(
    problem: &VerificationProblem,
    query: &MarginQuery,
    config: &Config,
    clock: &dyn Clock,
) -> Result<MarginOutcome> {
    query.validate(problem)?;
    let class = base_class(problem, &query.base, query.expected_class)?;
    let m = outputs(problem).len();
    let mut outcome = MarginOutcome {
        class,
        epsilon: None,
        robust_at_hi: false,
        bracket: (query.lo, query.hi),
        probes: Vec::new(),
        verify_calls: 0,
        stats: Stats::default(),
    };
    let probe = |eps: f64, outcome: &mut MarginOutcome| -> Result<bool> {
        let mut counterexample = None;
        for j in (0..m).filter(|&j| j != class) {
            let p = margin_problem(problem, query, eps, class, j)?;
            let r = verify_with_clock(&p, config, clock)?;
            outcome.verify_calls += 1;
            add_stats(&mut outcome.stats, &r.stats);
            if let Status::Satisfiable { inputs, .. } = r.status {
                counterexample = Some((j, inputs));
                break;
            }
        }
        let robust = counterexample.is_none();
        outcome.probes.push(MarginProbe { epsilon: eps, robust, counterexample });
        Ok(robust)
    };

    if probe(query.hi, &mut outcome)? {
        outcome.robust_at_hi = true;
        outcome.epsilon = Some(query.hi);
        outcome.bracket = (query.hi, query.hi);
        return Ok(outcome);
    }
    if !probe(query.lo, &mut outcome)? {
        outcome.bracket = (query.lo, query.lo);
        return Ok(outcome);
    }
    let (mut lo, mut hi) = (query.lo, query.hi);
    while hi - lo > query.precision {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut outcome)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    outcome.epsilon = Some(lo);
    outcome.bracket = (lo, hi);
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongClassQuery {
    pub class: usize,
    pub delta: f64,
}

/// `y_class ≥ y_j + δ` for every other output, over the input box.
pub fn strongclass_problem(problem: &VerificationProblem, query: &StrongClassQuery) -> Result<VerificationProblem> {
    check_class(problem, query.class, "class")?;
    if !non_negative(query.delta) {
        return Err(Error::Query("delta must be a finite non-negative number".into()));
    }
    let mut property = problem.box_constraints();
    for j in (0..outputs(problem).len()).filter(|&j| j != query.class) {
        property.push(output_gap(problem, query.class, j, query.delta));
    }
    Ok(problem.with_property(property)?)
}

pub fn strongclass(
    problem: &VerificationProblem,
    query: &StrongClassQuery,
    config: &Config,
    clock: &dyn Clock,
) -> Result<VerificationResult> {
    Ok(verify_with_clock(&strongclass_problem(problem, query)?, config, clock)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothNoiseQuery {
    /// Row-major `width × height` image.
    pub base: Vec<f64>,
    pub width: usize,
    pub height: usize,
    /// Bound on the noise difference between 4-neighbours.
    pub bound: f64,
    /// Width of the frozen frame around the image.
    pub border: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothNoiseProblem {
    pub problem: VerificationProblem,
    pub base_class: usize,
    /// Number of neighbour-difference constraints (two per adjacent pair).
    pub difference_constraints: usize,
}

/// Noise is `input − base`. Adjacent noise values differ by at most `bound`,
/// border noise is zero, and `y_target ≥ y_base_class`.
pub fn smoothnoise_problem(problem: &VerificationProblem, query: &SmoothNoiseQuery) -> Result<SmoothNoiseProblem> {
    let (w, h) = (query.width, query.height);
    let cells = w * h;
    let n = problem.network().inputs().len();
    if cells != n || query.base.len() != cells {
        return Err(Error::GridMismatch { cells: if cells != n { cells } else { query.base.len() }, inputs: n });
    }
    if !non_negative(query.bound) {
        return Err(Error::Query("bound must be a finite non-negative number".into()));
    }
    check_class(problem, query.target, "target class")?;
    let base_class = problem.network().classify(&query.base)?;
    if base_class == query.target {
        return Err(Error::Query(format!("base image is already classified as {base_class}")));
    }

    let frozen = border_coordinates(w, h, query.border);
    let bounds: Vec<(f64, f64)> = problem
        .input_box()
        .iter()
        .enumerate()
        .map(|(i, &b)| if frozen.contains(&i) { (query.base[i], query.base[i]) } else { b })
        .collect();
    let mut property = box_rows(problem, &bounds);
    let inputs = problem.network().inputs();
    let mut difference_constraints = 0;
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            let neighbours = [(c + 1 < w).then_some(p + 1), (r + 1 < h).then_some(p + w)];
            for q in neighbours.into_iter().flatten() {
                // noise(p) − noise(q) = (x_p − x_q) − (base_p − base_q)
                let shift = query.base[p] - query.base[q];
                let terms = vec![(1.0, inputs[p]), (-1.0, inputs[q])];
                property.push(LinearConstraint::at_most(terms.clone(), shift + query.bound));
                property.push(LinearConstraint::at_least(terms, shift - query.bound));
                difference_constraints += 2;
            }
        }
    }
    property.push(output_gap(problem, query.target, base_class, 0.0));
    Ok(SmoothNoiseProblem { problem: problem.with_property(property)?, base_class, difference_constraints })
}

pub fn smoothnoise(
    problem: &VerificationProblem,
    query: &SmoothNoiseQuery,
    config: &Config,
    clock: &dyn Clock,
) -> Result<(SmoothNoiseProblem, VerificationResult)> {
    let built = smoothnoise_problem(problem, query)?;
    let result = verify_with_clock(&built.problem, config, clock)?;
    Ok((built, result))
}
