//! Bounded-variable revised simplex for `max cᵀv` subject to sparse linear
//! rows and variable bounds, with warm starts after rows are appended or
//! bounds change.

mod factor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use factor::{Columns, Factor};

pub const PIVOT_TOL: f64 = 1e-9;
pub const PRIMAL_TOL: f64 = 1e-9;
pub const DUAL_TOL: f64 = 1e-9;

const REFACTOR_EVERY: usize = 64;
const BLAND_AFTER: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

impl LpRow {
    pub fn new(coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) -> Self {
        Self { coeffs, kind, rhs }
    }

    pub fn activity(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * v[j]).sum()
    }
}

/// A maximization LP.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) -> usize {
        self.rows.push(LpRow::new(coeffs, kind, rhs));
        self.rows.len() - 1
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidInstance("bound vectors do not match variables".into()));
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] || self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(Error::InvalidInstance(format!("bad bounds on variable {j}")));
            }
        }
        for row in &self.rows {
            if row.coeffs.iter().any(|&(j, a)| j >= n || !a.is_finite()) || !row.rhs.is_finite() {
                return Err(Error::InvalidInstance("bad LP row".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The objective bound fell below the cutoff before optimality.
    Cutoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// Row multipliers for the maximization: `≥ 0` on `≤` rows.
    pub row_duals: Vec<f64>,
    /// `c_j − a_jᵀ y` per variable.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Solves from scratch.
pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    Simplex::new(problem)?.solve()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

enum DualEnd {
    Feasible,
    Infeasible,
    Cutoff,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

/// Warm-startable simplex state.
pub struct Simplex {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    /// Structural entries of each row.
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    kinds: Vec<RowKind>,
    /// Minimization costs for structurals then slacks.
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    val: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    slot_of: Vec<usize>,
    factor: Option<Factor>,
    /// Bumped on every refactorization.
    factor_gen: usize,
    iterations: usize,
    degenerate_run: usize,
    iteration_limit: usize,
    cutoff: Option<f64>,
}

impl Simplex {
    pub fn new(problem: &LpProblem) -> Result<Self> {
        problem.validate()?;
        let n = problem.n_vars();
        let mut s = Self {
            n,
            m: 0,
            cols: vec![Vec::new(); n],
            rows: Vec::new(),
            rhs: Vec::new(),
            kinds: Vec::new(),
            cost: problem.objective.iter().map(|c| -c).collect(),
            lo: problem.lower.clone(),
            up: problem.upper.clone(),
            val: vec![0.0; n],
            state: vec![State::Lower; n],
            basis: Vec::new(),
            slot_of: vec![usize::MAX; n],
            factor: None,
            factor_gen: 0,
            iterations: 0,
            degenerate_run: 0,
            iteration_limit: 0,
            cutoff: None,
        };
        for j in 0..n {
            s.reset_nonbasic(j);
        }
        for row in &problem.rows {
            s.push_row(row);
        }
        Ok(s)
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.up[j])
    }

    fn reset_nonbasic(&mut self, j: usize) {
        let (l, u) = (self.lo[j], self.up[j]);
        let (st, v) = if l.is_finite() {
            (State::Lower, l)
        } else if u.is_finite() {
            (State::Upper, u)
        } else {
            (State::Zero, 0.0)
        };
        self.state[j] = st;
        self.val[j] = v;
    }

    fn push_row(&mut self, row: &LpRow) {
        let i = self.m;
        let mut activity = 0.0;
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
        for &(j, a) in &row.coeffs {
            if a != 0.0 {
                if let Some(e) = self.cols[j].last_mut().filter(|e| e.0 == i) {
                    e.1 += a;
                } else {
                    self.cols[j].push((i, a));
                }
                match entries.iter_mut().find(|e| e.0 == j) {
                    Some(e) => e.1 += a,
                    None => entries.push((j, a)),
                }
                activity += a * self.val[j];
            }
        }
        self.rows.push(entries);
        let (l, u) = match row.kind {
            RowKind::Le => (0.0, f64::INFINITY),
            RowKind::Eq => (0.0, 0.0),
            RowKind::Ge => (f64::NEG_INFINITY, 0.0),
        };
        self.m += 1;
        self.rhs.push(row.rhs);
        self.kinds.push(row.kind);
        self.cost.push(0.0);
        self.lo.push(l);
        self.up.push(u);
        self.val.push(row.rhs - activity);
        self.state.push(State::Basic);
        self.slot_of.push(self.basis.len());
        self.basis.push(self.n + i);
        self.factor = None;
    }

    /// Appends a row; the new slack enters the basis so the previous
    /// optimal basis stays dual feasible.
    pub fn add_row(&mut self, row: &LpRow) -> Result<usize> {
        if row.coeffs.iter().any(|&(j, a)| j >= self.n || !a.is_finite()) || !row.rhs.is_finite() {
            return Err(Error::InvalidInstance("bad LP row".into()));
        }
        self.push_row(row);
        Ok(self.m - 1)
    }

    /// Whether the slack of row `i` is basic (the row can be dropped
    /// without disturbing the current basis).
    pub fn row_is_slack(&self, i: usize) -> bool {
        self.state[self.n + i] == State::Basic
    }

    /// Drops the listed rows whose slack is basic and returns, for every old
    /// row, its new index (`None` when dropped). The remaining basis stays
    /// valid, so a previous optimum is still optimal.
    pub fn remove_rows(&mut self, rows: &[usize]) -> Vec<Option<usize>> {
        let n = self.n;
        let mut drop = vec![false; self.m];
        for &i in rows {
            if i < self.m && self.row_is_slack(i) {
                drop[i] = true;
            }
        }
        let mut map = vec![None; self.m];
        let mut next = 0;
        for i in 0..self.m {
            if !drop[i] {
                map[i] = Some(next);
                next += 1;
            }
        }
        if next == self.m {
            return map;
        }
        for col in &mut self.cols {
            col.retain(|&(r, _)| !drop[r]);
            for e in col.iter_mut() {
                e.0 = map[e.0].expect("kept row");
            }
        }
        let keep = |v: &mut Vec<f64>| {
            let mut k = 0;
            v.retain(|_| {
                let ok = k < n || !drop[k - n];
                k += 1;
                ok
            });
        };
        keep(&mut self.cost);
        keep(&mut self.lo);
        keep(&mut self.up);
        keep(&mut self.val);
        let mut k = 0;
        self.state.retain(|_| {
            let ok = k < n || !drop[k - n];
            k += 1;
            ok
        });
        let mut i = 0;
        self.rows.retain(|_| {
            let ok = !drop[i];
            i += 1;
            ok
        });
        let mut i = 0;
        self.rhs.retain(|_| {
            let ok = !drop[i];
            i += 1;
            ok
        });
        let mut i = 0;
        self.kinds.retain(|_| {
            let ok = !drop[i];
            i += 1;
            ok
        });
        let remap = |j: usize| if j < n { Some(j) } else { map[j - n].map(|r| n + r) };
        self.basis = self.basis.iter().filter_map(|&j| remap(j)).collect();
        self.m = next;
        self.slot_of = vec![usize::MAX; n + self.m];
        for (slot, &j) in self.basis.iter().enumerate() {
            self.slot_of[j] = slot;
        }
        debug_assert_eq!(self.basis.len(), self.m);
        self.factor = None;
        map
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> Result<()> {
        if j >= self.n || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::InvalidInstance(format!("bad bounds [{lower}, {upper}] for variable {j}")));
        }
        self.lo[j] = lower;
        self.up[j] = upper;
        match self.state[j] {
            State::Basic => {}
            State::Lower if lower.is_finite() => self.val[j] = lower,
            State::Upper if upper.is_finite() => self.val[j] = upper,
            _ => self.reset_nonbasic(j),
        }
        Ok(())
    }

    /// Stops the dual simplex once its objective, an upper bound on the
    /// optimum, drops below `cutoff`. A basis that is already optimal is
    /// still reported as `Optimal`.
    pub fn set_cutoff(&mut self, cutoff: Option<f64>) {
        self.cutoff = cutoff;
    }

    fn objective_value(&self) -> f64 {
        (0..self.n).map(|j| -self.cost[j] * self.val[j]).sum()
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.cost[j] = -c;
    }

    fn column(&self, j: usize) -> ColumnIter<'_> {
        if j < self.n {
            ColumnIter::Sparse(self.cols[j].iter())
        } else {
            ColumnIter::Unit(Some(j - self.n))
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(r, a)| a * y[r]).sum()
        } else {
            y[j - self.n]
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let mut start = Vec::with_capacity(self.m + 1);
        let mut entries = Vec::new();
        for _ in 0..=self.m {
            start.clear();
            entries.clear();
            start.push(0);
            for &j in &self.basis {
                entries.extend(self.column(j));
                start.push(entries.len());
            }
            match Factor::build_from(self.m, &Columns { start: &start, entries: &entries }) {
                Ok(f) => {
                    self.factor = Some(f);
                    self.factor_gen += 1;
                    self.recompute_basics();
                    return Ok(());
                }
                Err(sing) => {
                    log::debug!("repairing singular basis: {} columns", sing.slots.len());
                    for (&slot, &row) in sing.slots.iter().zip(&sing.rows) {
                        let out = self.basis[slot];
                        let slack = self.n + row;
                        if self.state[slack] == State::Basic {
                            return Err(Error::Numerical("basis repair found a basic slack".into()));
                        }
                        self.make_nonbasic_near(out);
                        self.basis[slot] = slack;
                        self.slot_of[slack] = slot;
                        self.state[slack] = State::Basic;
                    }
                }
            }
        }
        Err(Error::Numerical("could not repair singular basis".into()))
    }

    fn make_nonbasic_near(&mut self, j: usize) {
        self.slot_of[j] = usize::MAX;
        let (l, u, v) = (self.lo[j], self.up[j], self.val[j]);
        if l.is_finite() && (!u.is_finite() || (v - l).abs() <= (u - v).abs()) {
            self.state[j] = State::Lower;
            self.val[j] = l;
        } else if u.is_finite() {
            self.state[j] = State::Upper;
            self.val[j] = u;
        } else {
            self.state[j] = State::Zero;
            self.val[j] = 0.0;
        }
    }

    fn recompute_basics(&mut self) {
        let mut b = self.rhs.clone();
        for j in 0..self.n + self.m {
            if self.state[j] != State::Basic && self.val[j] != 0.0 {
                let v = self.val[j];
                for (r, a) in self.column(j) {
                    b[r] -= a * v;
                }
            }
        }
        let xb = self.factor.as_ref().expect("factor present").ftran(&b);
        for (slot, &j) in self.basis.iter().enumerate() {
            self.val[j] = xb[slot];
        }
    }

    fn ensure_factor(&mut self) -> Result<()> {
        let stale = match &self.factor {
            None => true,
            Some(f) => f.n_updates() >= REFACTOR_EVERY || f.eta_nnz() > 32 * self.m + 1000,
        };
        if stale {
            self.refactor()?;
        }
        Ok(())
    }

    fn factor(&self) -> &Factor {
        self.factor.as_ref().expect("factor present")
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.val[j];
        if v < self.lo[j] - PRIMAL_TOL {
            self.lo[j] - v
        } else if v > self.up[j] + PRIMAL_TOL {
            v - self.up[j]
        } else {
            0.0
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.basis.iter().any(|&j| self.infeasibility(j) > 0.0)
    }

    /// Reduced costs `d_j = c_j − a_jᵀ y` for the given basic costs.
    fn reduced_costs(&self, basic_cost: &[f64], cost_of: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>) {
        let y = self.factor().btran(basic_cost);
        let d = (0..self.n + self.m)
            .map(|j| if self.state[j] == State::Basic { 0.0 } else { cost_of(j) - self.dot_column(j, &y) })
            .collect();
        (y, d)
    }

    fn phase_two_duals(&self) -> (Vec<f64>, Vec<f64>) {
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.reduced_costs(&cb, |j| self.cost[j])
    }

    fn dual_feasible(&self, d: &[f64]) -> bool {
        (0..self.n + self.m).all(|j| match self.state[j] {
            State::Basic => true,
            State::Lower => d[j] >= -DUAL_TOL || self.lo[j] == self.up[j],
            State::Upper => d[j] <= DUAL_TOL || self.lo[j] == self.up[j],
            State::Zero => d[j].abs() <= DUAL_TOL,
        })
    }

    fn count_iteration(&mut self) -> Result<()> {
        self.iterations += 1;
        if self.iterations > self.iteration_limit {
            return Err(Error::Numerical(format!("simplex iteration limit {} reached", self.iteration_limit)));
        }
        Ok(())
    }

    pub fn solve(&mut self) -> Result<LpSolution> {
        self.iteration_limit = self.iterations + 50_000 + 50 * (self.n + self.m);
        self.degenerate_run = 0;
        for attempt in 0..4 {
            if attempt == 0 {
                self.ensure_factor()?;
                self.recompute_basics();
            } else {
                self.refactor()?;
            }
            let (_, d) = self.phase_two_duals();
            if self.flip_to_dual_feasible(&d) {
                self.recompute_basics();
            }
            if self.primal_infeasible() {
                let feasible = if self.dual_feasible(&d) {
                    match self.dual_simplex()? {
                        DualEnd::Feasible => true,
                        DualEnd::Infeasible => false,
                        DualEnd::Cutoff => return Ok(self.solution(LpStatus::Cutoff)),
                    }
                } else {
                    self.phase_one()?
                };
                if !feasible {
                    if self.confirm_infeasible()? {
                        return Ok(self.solution(LpStatus::Infeasible));
                    }
                    continue;
                }
            }
            match self.phase_two()? {
                Step::Unbounded => return Ok(self.solution(LpStatus::Unbounded)),
                _ => {
                    if self.factor().n_updates() > 0 {
                        self.recompute_basics();
                    }
                    let (_, d) = self.phase_two_duals();
                    if !self.primal_infeasible() && self.dual_feasible(&d) {
                        return Ok(self.solution(LpStatus::Optimal));
                    }
                    log::debug!("simplex: optimality lost after recomputing the basic solution, resuming");
                }
            }
        }
        Err(Error::Numerical("simplex failed to settle".into()))
    }

    /// Moves boxed nonbasic variables whose reduced cost has the wrong sign
    /// to their other bound. Returns whether anything moved.
    fn flip_to_dual_feasible(&mut self, d: &[f64]) -> bool {
        let mut moved = false;
        for j in 0..self.n + self.m {
            let (l, u) = (self.lo[j], self.up[j]);
            if !(l.is_finite() && u.is_finite()) || l == u {
                continue;
            }
            match self.state[j] {
                State::Lower if d[j] < -DUAL_TOL => {
                    self.state[j] = State::Upper;
                    self.val[j] = u;
                    moved = true;
                }
                State::Upper if d[j] > DUAL_TOL => {
                    self.state[j] = State::Lower;
                    self.val[j] = l;
                    moved = true;
                }
                _ => {}
            }
        }
        moved
    }

    /// Re-checks infeasibility from a fresh factorization.
    fn confirm_infeasible(&mut self) -> Result<bool> {
        self.refactor()?;
        if !self.primal_infeasible() {
            return Ok(false);
        }
        let (_, d) = self.phase_two_duals();
        if self.dual_feasible(&d) {
            let cutoff = self.cutoff.take();
            let end = self.dual_simplex();
            self.cutoff = cutoff;
            return Ok(matches!(end?, DualEnd::Infeasible));
        }
        Ok(!self.phase_one()?)
    }

    /// Phase one on the sum of infeasibilities. Returns whether a feasible
    /// basis was reached.
    fn phase_one(&mut self) -> Result<bool> {
        loop {
            self.ensure_factor()?;
            if !self.primal_infeasible() {
                return Ok(true);
            }
            let cb: Vec<f64> = self
                .basis
                .iter()
                .map(|&j| {
                    let v = self.val[j];
                    if v < self.lo[j] - PRIMAL_TOL {
                        -1.0
                    } else if v > self.up[j] + PRIMAL_TOL {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let (_, d) = self.reduced_costs(&cb, |_| 0.0);
            match self.primal_iteration(&d, true)? {
                Step::Continue => self.count_iteration()?,
                Step::Optimal => return Ok(false),
                Step::Unbounded => return Err(Error::Numerical("phase one unbounded".into())),
            }
        }
    }

    fn phase_two(&mut self) -> Result<Step> {
        loop {
            self.ensure_factor()?;
            let (_, d) = self.phase_two_duals();
            match self.primal_iteration(&d, false)? {
                Step::Continue => self.count_iteration()?,
                done => return Ok(done),
            }
        }
    }

    fn choose_entering(&self, d: &[f64]) -> Option<(usize, f64)> {
        let bland = self.degenerate_run >= BLAND_AFTER;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let dir = match self.state[j] {
                State::Basic => continue,
                _ if self.lo[j] == self.up[j] => continue,
                State::Lower if d[j] < -DUAL_TOL => 1.0,
                State::Upper if d[j] > DUAL_TOL => -1.0,
                State::Zero if d[j].abs() > DUAL_TOL => -d[j].signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = d[j].abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn primal_iteration(&mut self, d: &[f64], phase_one: bool) -> Result<Step> {
        let Some((q, dir)) = self.choose_entering(d) else {
            return Ok(Step::Optimal);
        };
        let alpha = self.factor().ftran_sparse(self.column(q));
        // basic j moves at rate -dir * alpha[slot]
        let tol = PRIMAL_TOL;
        let mut t_max = f64::INFINITY;
        for (slot, &j) in self.basis.iter().enumerate() {
            let rate = -dir * alpha[slot];
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            if let Some(limit) = self.primal_limit(j, rate, tol, phase_one) {
                t_max = t_max.min(limit);
            }
        }
        let range = self.up[q] - self.lo[q];
        let mut leave: Option<(usize, f64, f64)> = None;
        let mut best_rate = 0.0;
        let bland = self.degenerate_run >= BLAND_AFTER;
        for (slot, &j) in self.basis.iter().enumerate() {
            let rate = -dir * alpha[slot];
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let Some((ratio, target)) = self.primal_exact(j, rate, phase_one) else {
                continue;
            };
            if ratio <= t_max {
                let better = if bland {
                    leave.map_or(true, |(s, r, _)| ratio < r - 1e-12 || (ratio <= r + 1e-12 && j < self.basis[s]))
                } else {
                    rate.abs() > best_rate
                };
                if better {
                    best_rate = rate.abs();
                    leave = Some((slot, ratio, target));
                }
            }
        }
        if range.is_finite() && leave.map_or(true, |(_, r, _)| range <= r) {
            // bound flip
            let t = range;
            for (slot, &j) in self.basis.iter().enumerate() {
                self.val[j] -= t * dir * alpha[slot];
            }
            if dir > 0.0 {
                self.state[q] = State::Upper;
                self.val[q] = self.up[q];
            } else {
                self.state[q] = State::Lower;
                self.val[q] = self.lo[q];
            }
            self.degenerate_run = 0;
            return Ok(Step::Continue);
        }
        let Some((slot, ratio, target)) = leave else {
            return Ok(Step::Unbounded);
        };
        let t = ratio.max(0.0);
        if t <= 1e-12 {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        for (s, &j) in self.basis.iter().enumerate() {
            self.val[j] -= t * dir * alpha[s];
        }
        self.val[q] += t * dir;
        self.pivot(slot, q, target, &alpha);
        Ok(Step::Continue)
    }

    /// Harris pass-one step limit for basic `j` moving at `rate`.
    fn primal_limit(&self, j: usize, rate: f64, tol: f64, phase_one: bool) -> Option<f64> {
        let v = self.val[j];
        let (l, u) = (self.lo[j], self.up[j]);
        if phase_one && v < l - PRIMAL_TOL {
            return (rate > 0.0).then(|| (l - v + tol) / rate);
        }
        if phase_one && v > u + PRIMAL_TOL {
            return (rate < 0.0).then(|| (v - u + tol) / -rate);
        }
        if rate < 0.0 {
            l.is_finite().then(|| ((v - l).max(0.0) + tol) / -rate)
        } else {
            u.is_finite().then(|| ((u - v).max(0.0) + tol) / rate)
        }
    }

    /// Exact ratio and the bound basic `j` lands on.
    fn primal_exact(&self, j: usize, rate: f64, phase_one: bool) -> Option<(f64, f64)> {
        let v = self.val[j];
        let (l, u) = (self.lo[j], self.up[j]);
        if phase_one && v < l - PRIMAL_TOL {
            return (rate > 0.0).then(|| ((l - v) / rate, l));
        }
        if phase_one && v > u + PRIMAL_TOL {
            return (rate < 0.0).then(|| ((v - u) / -rate, u));
        }
        if rate < 0.0 {
            l.is_finite().then(|| ((v - l).max(0.0) / -rate, l))
        } else {
            u.is_finite().then(|| ((u - v).max(0.0) / rate, u))
        }
    }

    /// Basis exchange: `q` enters at `slot`, the old basic leaves at `target`.
    fn pivot(&mut self, slot: usize, q: usize, target: f64, alpha: &[f64]) {
        let out = self.basis[slot];
        self.val[out] = target;
        self.state[out] = if target == self.lo[out] { State::Lower } else { State::Upper };
        self.slot_of[out] = usize::MAX;
        self.basis[slot] = q;
        self.slot_of[q] = slot;
        self.state[q] = State::Basic;
        self.factor.as_mut().expect("factor present").update(slot, alpha);
    }

    /// Dual simplex from a dual-feasible basis.
    fn dual_simplex(&mut self) -> Result<DualEnd> {
        let mut d: Vec<f64> = Vec::new();
        let mut d_gen = usize::MAX;
        let mut row = vec![0.0; self.n + self.m];
        let mut mark = vec![false; self.n + self.m];
        let mut touched: Vec<usize> = Vec::new();
        loop {
            self.ensure_factor()?;
            if d_gen != self.factor_gen {
                d = self.phase_two_duals().1;
                d_gen = self.factor_gen;
            }
            if let Some(c) = self.cutoff {
                if self.objective_value() < c - 1e-9 * c.abs().max(1.0) {
                    return Ok(DualEnd::Cutoff);
                }
            }
            let bland = self.degenerate_run >= BLAND_AFTER;
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for (slot, &j) in self.basis.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf <= 0.0 {
                    continue;
                }
                if bland {
                    if leave.map_or(true, |(s, _)| j < self.basis[s]) {
                        leave = Some((slot, inf));
                    }
                } else if inf > worst {
                    worst = inf;
                    leave = Some((slot, inf));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(DualEnd::Feasible);
            };
            let jr = self.basis[r];
            let below = self.val[jr] < self.lo[jr];
            let target = if below { self.lo[jr] } else { self.up[jr] };

            let rho = self.factor().btran_unit(r);

            // pivot row over the nonbasic columns, built from the rows where rho is nonzero
            touched.clear();
            for (i, &ri) in rho.iter().enumerate() {
                if ri == 0.0 {
                    continue;
                }
                let slack = self.n + i;
                if self.state[slack] != State::Basic && self.lo[slack] != self.up[slack] {
                    mark[slack] = true;
                    touched.push(slack);
                    row[slack] = ri;
                }
                for &(j, a) in &self.rows[i] {
                    if self.state[j] == State::Basic || self.lo[j] == self.up[j] {
                        continue;
                    }
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    row[j] += ri * a;
                }
            }
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut t_max = f64::INFINITY;
            for &j in &touched {
                let st = self.state[j];
                let a = row[j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                // x_r changes by -a * dx_j; we need it to move toward target
                let eligible = match st {
                    State::Lower => (below && a < 0.0) || (!below && a > 0.0),
                    State::Upper => (below && a > 0.0) || (!below && a < 0.0),
                    State::Zero => true,
                    State::Basic => false,
                };
                if !eligible {
                    continue;
                }
                let dj = match st {
                    State::Lower => d[j].max(0.0),
                    State::Upper => (-d[j]).max(0.0),
                    _ => d[j].abs(),
                };
                t_max = t_max.min((dj + DUAL_TOL) / a.abs());
                cands.push((j, a, dj / a.abs()));
            }
            let mut pick: Option<(usize, f64)> = None;
            if bland {
                let min_ratio = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
                pick = cands.iter().find(|c| c.2 <= min_ratio + 1e-12).map(|c| (c.0, c.1));
            } else {
                let mut best = 0.0;
                for &(j, a, ratio) in &cands {
                    if ratio <= t_max && a.abs() > best {
                        best = a.abs();
                        pick = Some((j, a));
                    }
                }
            }
            let Some((q, arq)) = pick else {
                for &j in &touched {
                    row[j] = 0.0;
                    mark[j] = false;
                }
                return Ok(DualEnd::Infeasible);
            };
            let alpha = self.factor().ftran_sparse(self.column(q));
            if (alpha[r] - arq).abs() > 1e-6 * arq.abs().max(1.0) {
                for &j in &touched {
                    row[j] = 0.0;
                    mark[j] = false;
                }
                log::debug!("dual simplex: pivot mismatch {} vs {}, refactoring", alpha[r], arq);
                self.refactor()?;
                self.count_iteration()?;
                continue;
            }
            let step = d[q] / arq;
            if d[q].abs() <= DUAL_TOL {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            for &j in &touched {
                d[j] -= step * row[j];
                row[j] = 0.0;
                mark[j] = false;
            }
            d[q] = 0.0;
            d[jr] = -step;
            let dq = (self.val[jr] - target) / alpha[r];
            for (s, &j) in self.basis.iter().enumerate() {
                self.val[j] -= dq * alpha[s];
            }
            self.val[q] += dq;
            self.pivot(r, q, target, &alpha);
            self.count_iteration()?;
        }
    }

    fn solution(&self, status: LpStatus) -> LpSolution {
        let x: Vec<f64> = self.val[..self.n].to_vec();
        let (y, d) = if self.factor.is_some() { self.phase_two_duals() } else { (vec![0.0; self.m], vec![0.0; self.n + self.m]) };
        let objective = x.iter().zip(&self.cost).map(|(v, c)| -c * v).sum();
        LpSolution {
            status,
            x,
            row_duals: y.iter().map(|v| -v).collect(),
            reduced_costs: d[..self.n].iter().map(|v| -v).collect(),
            objective,
            iterations: self.iterations,
        }
    }
}

/// Residuals of the optimality conditions for a claimed optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub primal_residual: f64,
    pub dual_sign_residual: f64,
    pub stationarity_residual: f64,
    pub complementarity_residual: f64,
    pub duality_gap: f64,
}

impl KktReport {
    pub fn is_ok(&self, tol: f64) -> bool {
        self.primal_residual <= tol
            && self.dual_sign_residual <= tol
            && self.stationarity_residual <= tol
            && self.complementarity_residual <= tol
            && self.duality_gap <= tol
    }
}

/// Checks primal feasibility, dual sign conditions, reduced-cost signs,
/// complementary slackness and the duality gap. Residuals are scaled by
/// `max(1, |value|)` of the quantity they compare against.
pub fn verify_kkt(problem: &LpProblem, sol: &LpSolution) -> KktReport {
    let n = problem.n_vars();
    let x = &sol.x;
    let y = &sol.row_duals;
    let scale = |v: f64| v.abs().max(1.0);
    let mut primal: f64 = 0.0;
    for j in 0..n {
        primal = primal.max((problem.lower[j] - x[j]) / scale(problem.lower[j]));
        primal = primal.max((x[j] - problem.upper[j]) / scale(problem.upper[j]));
    }
    let mut sign: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut dual_obj = 0.0;
    for (i, row) in problem.rows.iter().enumerate() {
        let act = row.activity(x);
        let slack = row.rhs - act;
        let s = scale(row.rhs);
        match row.kind {
            RowKind::Le => {
                primal = primal.max(-slack / s);
                sign = sign.max(-y[i]);
            }
            RowKind::Ge => {
                primal = primal.max(slack / s);
                sign = sign.max(y[i]);
            }
            RowKind::Eq => primal = primal.max(slack.abs() / s),
        }
        comp = comp.max((y[i] * slack).abs() / s);
        dual_obj += row.rhs * y[i];
    }
    let mut rc = problem.objective.clone();
    for (i, row) in problem.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            rc[j] -= a * y[i];
        }
    }
    let mut stat: f64 = 0.0;
    for j in 0..n {
        let (l, u) = (problem.lower[j], problem.upper[j]);
        let at_lower = l.is_finite() && (x[j] - l).abs() <= PRIMAL_TOL * scale(l) * 10.0;
        let at_upper = u.is_finite() && (x[j] - u).abs() <= PRIMAL_TOL * scale(u) * 10.0;
        let bad = match (at_lower, at_upper) {
            (true, true) => 0.0,
            (true, false) => rc[j].max(0.0),
            (false, true) => (-rc[j]).max(0.0),
            (false, false) => rc[j].abs(),
        };
        stat = stat.max(bad / scale(problem.objective[j]));
        dual_obj += rc[j] * x[j];
    }
    let primal_obj: f64 = problem.objective.iter().zip(x).map(|(c, v)| c * v).sum();
    KktReport {
        primal_residual: primal.max(0.0),
        dual_sign_residual: sign.max(0.0),
        stationarity_residual: stat,
        complementarity_residual: comp,
        duality_gap: (primal_obj - dual_obj).abs() / scale(primal_obj),
    }
}

enum ColumnIter<'a> {
    Sparse(std::slice::Iter<'a, (usize, f64)>),
    Unit(Option<usize>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColumnIter::Sparse(it) => it.next().copied(),
            ColumnIter::Unit(r) => r.take().map(|r| (r, 1.0)),
        }
    }
}
