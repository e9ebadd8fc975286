//! Linear programs over bounded variables and a dense primal simplex.
//!
//! The solver works on the bounded form: every row `Σ a·x (≤|≥|=) b` gets a
//! logical column `s` with `Σ a·x − s = 0` and the row sense moved into the
//! bounds of `s`. Phase 1 minimises the sum of artificials added only for rows
//! the starting point violates; phase 2 minimises the objective. Pricing is
//! Dantzig's rule, switching to Bland's rule after a run of degenerate pivots.
//! The tableau is rebuilt from the original matrix every [`REFACTOR_EVERY`]
//! pivots and once more before a solution is reported.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Allowed violation of a row or bound in a reported solution.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Smallest tableau entry accepted as a pivot.
pub const PIVOT_TOL: f64 = 1e-9;
const OPTIMALITY_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const DEGENERATE_BEFORE_BLAND: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// `Σ coeff·var (cmp) rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Row {
    pub fn new(terms: Vec<(VarId, f64)>, cmp: Cmp, rhs: f64) -> Self {
        Row { terms, cmp, rhs }
    }

    pub fn le(terms: Vec<(VarId, f64)>, rhs: f64) -> Self {
        Row::new(terms, Cmp::Le, rhs)
    }

    pub fn ge(terms: Vec<(VarId, f64)>, rhs: f64) -> Self {
        Row::new(terms, Cmp::Ge, rhs)
    }

    pub fn eq(terms: Vec<(VarId, f64)>, rhs: f64) -> Self {
        Row::new(terms, Cmp::Eq, rhs)
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.cmp {
            Cmp::Le => (a - self.rhs).max(0.0),
            Cmp::Ge => (self.rhs - a).max(0.0),
            Cmp::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
struct Batch {
    label: String,
    start: usize,
}

/// Variables with bounds, rows grouped into removable batches, and a
/// minimisation objective.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    vars: Vec<Variable>,
    rows: Vec<Row>,
    batches: Vec<Batch>,
    objective: Vec<(VarId, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { solution: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, LpOutcome::Infeasible)
    }
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable { name: name.into(), lower, upper });
        VarId(self.vars.len() - 1)
    }

    /// Appends a row. Rows added while a batch is open belong to that batch.
    pub fn add_row(&mut self, row: Row) -> Result<()> {
        self.check_row(&row)?;
        self.rows.push(row);
        Ok(())
    }

    fn check_row(&self, row: &Row) -> Result<()> {
        match row.terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
            Some((v, _)) => Err(Error::UnknownVar(v.0)),
            None => Ok(()),
        }
    }

    pub fn push_batch(&mut self, label: impl Into<String>, rows: Vec<Row>) -> Result<()> {
        for row in &rows {
            self.check_row(row)?;
        }
        self.batches.push(Batch { label: label.into(), start: self.rows.len() });
        self.rows.extend(rows);
        Ok(())
    }

    /// Removes the most recent batch, which must carry `label`.
    pub fn pop_batch(&mut self, label: &str) -> Result<Vec<Row>> {
        match self.batches.last() {
            Some(b) if b.label == label => {
                let b = self.batches.pop().expect("checked");
                Ok(self.rows.split_off(b.start))
            }
            _ => Err(Error::BatchOrder(label.into())),
        }
    }

    pub fn set_objective(&mut self, objective: Vec<(VarId, f64)>) {
        self.objective = objective;
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    /// Moves one bound inward. Looser values are ignored; values crossing the
    /// opposite bound by more than [`FEASIBILITY_TOL`] are rejected.
    pub fn tighten_var_bound(&mut self, id: VarId, side: BoundSide, value: f64) -> Result<()> {
        let var = self.vars.get_mut(id.0).ok_or(Error::UnknownVar(id.0))?;
        match side {
            BoundSide::Lower => {
                if value > var.upper + FEASIBILITY_TOL {
                    return Err(Error::BoundCross { var: id.0, value });
                }
                if value > var.lower {
                    var.lower = value.min(var.upper);
                }
            }
            BoundSide::Upper => {
                if value < var.lower - FEASIBILITY_TOL {
                    return Err(Error::BoundCross { var: id.0, value });
                }
                if value < var.upper {
                    var.upper = value.max(var.lower);
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any row or variable bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x));
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xv)| (v.lower - xv).max(xv - v.upper).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        for v in &self.vars {
            if v.lower > v.upper + FEASIBILITY_TOL {
                return Ok(LpOutcome::Infeasible);
            }
        }
        let mut simplex = match Tableau::new(self) {
            Some(t) => t,
            None => return Ok(LpOutcome::Infeasible),
        };
        simplex.solve(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: usize,
    cols: usize,
    structural: usize,
    first_artificial: usize,
    /// Original constraint matrix, row-major.
    orig: Vec<f64>,
    /// B⁻¹·orig
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    cost: Vec<f64>,
    since_refactor: usize,
}

impl Tableau {
    /// Builds the phase-1 starting basis. Returns `None` for a row with no
    /// finite side (never produced by [`Row`]) or malformed bounds.
    fn new(lp: &LinearProgram) -> Option<Self> {
        let n = lp.vars.len();
        let m = lp.rows.len();
        let mut x0: Vec<f64> = lp
            .vars
            .iter()
            .map(|v| {
                if v.lower.is_finite() {
                    v.lower
                } else if v.upper.is_finite() {
                    v.upper
                } else {
                    0.0
                }
            })
            .collect();
        let mut lower: Vec<f64> = lp.vars.iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = lp.vars.iter().map(|v| v.upper.max(v.lower)).collect();

        // dense rows over structural + logical columns
        let mut dense: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut artificial_rows = Vec::new();
        let mut basis = vec![0; m];
        for (i, row) in lp.rows.iter().enumerate() {
            let mut r = vec![0.0; n];
            for &(v, c) in &row.terms {
                r[v.0] += c;
            }
            let activity: f64 = r.iter().zip(&x0).map(|(a, b)| a * b).sum();
            let (sl, su) = match row.cmp {
                Cmp::Le => (f64::NEG_INFINITY, row.rhs),
                Cmp::Ge => (row.rhs, f64::INFINITY),
                Cmp::Eq => (row.rhs, row.rhs),
            };
            lower.push(sl);
            upper.push(su);
            if activity >= sl && activity <= su {
                x0.push(activity);
                basis[i] = n + i;
            } else {
                let s = activity.clamp(sl, su);
                x0.push(s);
                artificial_rows.push((i, activity - s));
            }
            dense.push(r);
        }
        let first_artificial = n + m;
        let cols = first_artificial + artificial_rows.len();
        let mut orig = vec![0.0; m * cols];
        for (i, r) in dense.iter().enumerate() {
            orig[i * cols..i * cols + n].copy_from_slice(r);
            orig[i * cols + n + i] = -1.0;
        }
        for (k, &(i, excess)) in artificial_rows.iter().enumerate() {
            let col = first_artificial + k;
            let sign = if excess > 0.0 { -1.0 } else { 1.0 };
            orig[i * cols + col] = sign;
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x0.push(excess.abs());
            basis[i] = col;
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan()) {
            return None;
        }
        let mut is_basic = vec![false; cols];
        for &b in &basis {
            is_basic[b] = true;
        }
        let mut cost = vec![0.0; cols];
        for c in &mut cost[first_artificial..] {
            *c = 1.0;
        }
        Some(Tableau {
            rows: m,
            cols,
            structural: n,
            first_artificial,
            t: orig.clone(),
            orig,
            lower,
            upper,
            x: x0,
            basis,
            is_basic,
            cost,
            since_refactor: 0,
        })
    }

    fn solve(&mut self, lp: &LinearProgram) -> Result<LpOutcome> {
        self.refactor()?;
        let limit = 20_000 + 50 * (self.rows + self.cols);
        if self.cols > self.first_artificial {
            self.run(limit)?;
            let infeasibility: f64 = self.x[self.first_artificial..].iter().sum();
            if infeasibility > FEASIBILITY_TOL {
                return Ok(LpOutcome::Infeasible);
            }
            self.retire_artificials()?;
        }
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for &(v, c) in &lp.objective {
            self.cost[v.0] += c;
        }
        if self.run(limit)? == PhaseEnd::Unbounded {
            return Ok(LpOutcome::Unbounded);
        }
        self.refactor()?;
        let solution = self.x[..self.structural].to_vec();
        let objective = lp.objective.iter().map(|&(v, c)| c * solution[v.0]).sum();
        Ok(LpOutcome::Optimal { solution, objective })
    }

    /// Fixes artificials at zero and pivots basic ones out where possible.
    fn retire_artificials(&mut self) -> Result<()> {
        for col in self.first_artificial..self.cols {
            self.upper[col] = 0.0;
            if !self.is_basic[col] {
                self.x[col] = 0.0;
            }
        }
        for r in 0..self.rows {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let row = &self.t[r * self.cols..(r + 1) * self.cols];
            let mut best = None;
            let mut best_abs = 1e-7;
            for (j, &a) in row[..self.first_artificial].iter().enumerate() {
                if !self.is_basic[j] && a.abs() > best_abs {
                    best = Some(j);
                    best_abs = a.abs();
                }
            }
            if let Some(j) = best {
                let leaving = self.basis[r];
                self.pivot(r, j);
                self.x[leaving] = 0.0;
            }
        }
        self.recompute_basic();
        Ok(())
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.cols + c]
    }

    /// Basic values from the nonbasic ones: x_B = −Σ_N t·x_N.
    fn recompute_basic(&mut self) {
        for r in 0..self.rows {
            let row = &self.t[r * self.cols..(r + 1) * self.cols];
            let mut v = 0.0;
            for (j, &a) in row.iter().enumerate() {
                if !self.is_basic[j] && a != 0.0 {
                    v -= a * self.x[j];
                }
            }
            self.x[self.basis[r]] = v;
        }
    }

    /// Rebuilds B⁻¹·orig by Gauss-Jordan elimination with partial pivoting
    /// over the current basic columns.
    fn refactor(&mut self) -> Result<()> {
        self.t.copy_from_slice(&self.orig);
        let basic_cols: Vec<usize> = self.basis.clone();
        let mut assigned = vec![false; self.rows];
        let mut new_basis = vec![usize::MAX; self.rows];
        for &col in &basic_cols {
            let mut best = None;
            let mut best_abs = 1e-11;
            for (r, &taken) in assigned.iter().enumerate() {
                if !taken && self.at(r, col).abs() > best_abs {
                    best = Some(r);
                    best_abs = self.at(r, col).abs();
                }
            }
            let r = best.ok_or(Error::Numeric("singular basis"))?;
            assigned[r] = true;
            new_basis[r] = col;
            self.eliminate(r, col);
        }
        self.basis = new_basis;
        self.since_refactor = 0;
        self.recompute_basic();
        Ok(())
    }

    fn eliminate(&mut self, r: usize, col: usize) {
        let cols = self.cols;
        let piv = self.t[r * cols + col];
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v /= piv;
        }
        self.t[r * cols + col] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (pivot_row, after) = rest.split_at_mut(cols);
        for other in before.chunks_mut(cols).chain(after.chunks_mut(cols)) {
            let f = other[col];
            if f != 0.0 {
                for (o, p) in other.iter_mut().zip(pivot_row.iter()) {
                    *o -= f * p;
                }
                other[col] = 0.0;
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let leaving = self.basis[r];
        self.eliminate(r, j);
        self.is_basic[leaving] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
        self.since_refactor += 1;
    }

    fn run(&mut self, limit: usize) -> Result<PhaseEnd> {
        let mut degenerate = 0usize;
        let mut reduced = vec![0.0; self.cols];
        for _ in 0..limit {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let bland = degenerate >= DEGENERATE_BEFORE_BLAND;

            // reduced costs d_j = c_j − Σ_r c_B(r)·t[r][j]
            reduced.copy_from_slice(&self.cost);
            for r in 0..self.rows {
                let cb = self.cost[self.basis[r]];
                if cb != 0.0 {
                    let row = &self.t[r * self.cols..(r + 1) * self.cols];
                    for (d, &a) in reduced.iter_mut().zip(row) {
                        *d -= cb * a;
                    }
                }
            }

            let mut entering = None;
            let mut best = 0.0;
            for (j, &d) in reduced.iter().enumerate() {
                if self.is_basic[j] || self.upper[j] <= self.lower[j] {
                    continue;
                }
                let can_increase = d < -OPTIMALITY_TOL && self.x[j] < self.upper[j];
                let can_decrease = d > OPTIMALITY_TOL && self.x[j] > self.lower[j];
                if !(can_increase || can_decrease) {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some(j);
                }
            }
            let Some(j) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let dir = if reduced[j] < 0.0 { 1.0 } else { -1.0 };

            // ratio test
            let mut theta = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_alpha = 0.0;
            for r in 0..self.rows {
                let alpha = self.at(r, j);
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -alpha * dir;
                let b = self.basis[r];
                let val = self.x[b];
                let (limit, bound) = if rate < 0.0 {
                    if !self.lower[b].is_finite() {
                        continue;
                    }
                    (((val - self.lower[b]) / -rate).max(0.0), self.lower[b])
                } else {
                    if !self.upper[b].is_finite() {
                        continue;
                    }
                    (((self.upper[b] - val) / rate).max(0.0), self.upper[b])
                };
                let better = match leave {
                    None => limit < theta || !theta.is_finite(),
                    Some((lr, _)) => {
                        if limit < theta - 1e-12 {
                            true
                        } else if limit <= theta + 1e-12 {
                            if bland {
                                b < self.basis[lr]
                            } else {
                                alpha.abs() > leave_alpha
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = limit;
                    leave = Some((r, bound));
                    leave_alpha = alpha.abs();
                }
            }
            if !theta.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }
            degenerate = if theta < 1e-12 { degenerate + 1 } else { 0 };

            let step = dir * theta;
            self.x[j] += step;
            for r in 0..self.rows {
                let alpha = self.t[r * self.cols + j];
                if alpha != 0.0 {
                    self.x[self.basis[r]] -= alpha * step;
                }
            }
            match leave {
                None => {
                    // bound flip
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((r, bound)) => {
                    let leaving = self.basis[r];
                    self.pivot(r, j);
                    self.x[leaving] = bound;
                }
            }
        }
        Err(Error::Numeric("iteration limit reached"))
    }
}

/// Writes `lp` in CPLEX LP text form. Rows are named `c1..cN` in program
/// order; every variable gets an explicit bound line.
pub fn export_lp(lp: &LinearProgram) -> String {
    use core::fmt::Write;

    fn num(x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            x
        }
    }
    fn terms(out: &mut String, lp: &LinearProgram, terms: &[(VarId, f64)]) {
        if terms.is_empty() {
            let name = lp.vars.first().map_or("x1", |v| v.name.as_str());
            let _ = write!(out, " 0 {name}");
            return;
        }
        for &(v, c) in terms {
            let sign = if c < 0.0 { '-' } else { '+' };
            let _ = write!(out, " {sign}{} {}", num(c.abs()), lp.vars[v.0].name);
        }
    }

    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    terms(&mut out, lp, &lp.objective);
    out.push_str("\nSubject To\n");
    for (i, row) in lp.rows.iter().enumerate() {
        let _ = write!(out, " c{}:", i + 1);
        terms(&mut out, lp, &row.terms);
        let op = match row.cmp {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", num(row.rhs));
    }
    out.push_str("Bounds\n");
    for v in &lp.vars {
        let (lo, hi) = (v.lower, v.upper);
        let _ = match (lo.is_finite(), hi.is_finite()) {
            (false, false) => writeln!(out, " {} free", v.name),
            (true, true) if lo == hi => writeln!(out, " {} = {}", v.name, num(lo)),
            (true, true) => writeln!(out, " {} <= {} <= {}", num(lo), v.name, num(hi)),
            (true, false) => writeln!(out, " {} >= {}", v.name, num(lo)),
            (false, true) => writeln!(out, " -inf <= {} <= {}", v.name, num(hi)),
        };
    }
    out.push_str("End\n");
    out
}
