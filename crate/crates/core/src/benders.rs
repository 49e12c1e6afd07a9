//! Closed-form Benders cuts for the rank-list choice subproblems and the
//! first-stage cutting-plane loop over the LP relaxation.
//!
//! The master problem carries one `θ_i` per scenario and reads
//! `max (1/N) Σ θ_i` over `x ∈ Ω`. A cut `θ_i ≤ intercept + coeffs · x`
//! bounds the reward scenario `i` can deliver.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::apps::round_to_feasible;
use crate::error::{Error, Result};
use crate::model::{choose_unchecked, sample_objective, BinaryDecision, DecisionSpace, Instance};
use crate::simplex::{LpProblem, LpRow, LpStatus, RowKind, Simplex};

/// Minimum relative violation for a cut to be added.
pub const DEFAULT_MRV: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendersCut {
    pub scenario: usize,
    pub intercept: f64,
    pub coeffs: Vec<f64>,
}

impl BendersCut {
    /// Right-hand side `intercept + coeffs · x`.
    pub fn rhs(&self, x: &[f64]) -> f64 {
        self.intercept + self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
    }

    pub fn rhs_binary(&self, x: &BinaryDecision) -> f64 {
        self.intercept + x.offered().map(|j| self.coeffs[j]).sum::<f64>()
    }

    /// `(θ − rhs) / max(1, |rhs|)`; positive when the point violates the cut.
    pub fn violation(&self, x: &[f64], theta: f64) -> f64 {
        let rhs = self.rhs(x);
        (theta - rhs) / rhs.abs().max(1.0)
    }

    fn key(&self) -> (usize, Vec<i64>) {
        let q = |v: f64| (v * 1e9).round() as i64;
        let mut k = Vec::with_capacity(self.coeffs.len() + 1);
        k.push(q(self.intercept));
        k.extend(self.coeffs.iter().map(|&v| q(v)));
        (self.scenario, k)
    }
}

/// Dual of the integer subproblem at a 0/1 offer.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerDual {
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    /// Option chosen under the offer.
    pub chosen: usize,
}

impl IntegerDual {
    /// Dual objective `λ + Σ ν_j x_j + Σ μ_k (1 − x_k)`.
    pub fn objective(&self, x: &BinaryDecision) -> f64 {
        let mut v = self.lambda;
        for j in 0..x.len() {
            if x.get(j) {
                v += self.nu[j];
            } else {
                v += self.mu[j];
            }
        }
        v
    }
}

/// Analytical optimal dual of the integer subproblem of scenario `i`.
pub fn integer_dual(x: &BinaryDecision, i: usize, inst: &Instance) -> Result<IntegerDual> {
    let m = inst.n_options();
    if x.len() != m {
        return Err(Error::InfeasibleDecision("decision length does not match the instance".into()));
    }
    let (chosen, lambda) = choose_unchecked(x, i, inst)?;
    let r = inst.scenarios().r_row(i);
    let runner_up = x.offered().filter(|&j| j != chosen).map(|j| r[j]).fold(f64::NEG_INFINITY, f64::max);
    let mut mu = vec![0.0; m];
    mu[chosen] = (runner_up - lambda).max(0.0);
    let mut nu = vec![0.0; m];
    for j in 0..m {
        if !x.get(j) {
            let above = if inst.prefers(i, chosen, j) { mu[chosen] } else { 0.0 };
            nu[j] = (r[j] - lambda - above).max(0.0);
        }
    }
    Ok(IntegerDual { lambda, mu, nu, chosen })
}

/// Optimality cut from the integer dual; tight at `x`.
pub fn integer_cut(x: &BinaryDecision, i: usize, inst: &Instance) -> Result<BendersCut> {
    let d = integer_dual(x, i, inst)?;
    Ok(BendersCut {
        scenario: i,
        intercept: d.lambda + d.mu.iter().sum::<f64>(),
        coeffs: d.nu.iter().zip(&d.mu).map(|(n, m)| n - m).collect(),
    })
}

/// `β_j = min{x_j, min over preferred k of (1 − x_k)}` for scenario `i`.
pub fn beta_weights(x: &[f64], i: usize, inst: &Instance) -> Vec<f64> {
    beta_with_blockers(x, i, inst).0
}

/// β together with, per option, the most-offered preferred option
/// (lowest index on ties), or `None` when nothing ranks above it.
fn beta_with_blockers(x: &[f64], i: usize, inst: &Instance) -> (Vec<f64>, Vec<Option<usize>>) {
    let m = inst.n_options();
    let mut beta = vec![0.0; m];
    let mut blocker = vec![None; m];
    let mut best: Option<usize> = None;
    for &j in inst.ranking(i) {
        let j = j as usize;
        beta[j] = match best {
            Some(k) => x[j].min(1.0 - x[k]),
            None => x[j],
        };
        blocker[j] = best;
        best = match best {
            Some(k) if x[k] > x[j] || (x[k] == x[j] && k < j) => Some(k),
            _ => Some(j),
        };
    }
    (beta, blocker)
}

/// Dual of the β-bounded continuous knapsack `max Σ r_j y_j, Σ y = 1, 0 ≤ y ≤ β`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackDual {
    pub lambda: f64,
    pub eta: Vec<f64>,
    pub critical: usize,
    /// Optimal knapsack value, equal to `λ′ + Σ η_j β_j`.
    pub value: f64,
}

pub fn knapsack_dual(beta: &[f64], i: usize, inst: &Instance) -> Result<KnapsackDual> {
    let r = inst.scenarios().r_row(i);
    let total: f64 = beta.iter().sum();
    if total < 1.0 - 1e-9 {
        return Err(Error::Underfilled { scenario: i, total });
    }
    let mut order: Vec<usize> = (0..beta.len()).collect();
    order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
    let mut cum = 0.0;
    let mut critical = None;
    let mut last_positive = order[0];
    for &j in &order {
        if beta[j] > 0.0 {
            last_positive = j;
        }
        cum += beta[j];
        if cum >= 1.0 - 1e-12 {
            critical = Some(j);
            break;
        }
    }
    let critical = critical.unwrap_or(last_positive);
    let lambda = r[critical];
    let eta: Vec<f64> = r.iter().map(|&rj| (rj - lambda).max(0.0)).collect();
    let value = lambda + eta.iter().zip(beta).map(|(e, b)| e * b).sum::<f64>();
    Ok(KnapsackDual { lambda, eta, critical, value })
}

/// Cut at a fractional point: knapsack dual charged back to the binding
/// branch of each `β_j`. Tight at `x` with value equal to the knapsack optimum.
pub fn fractional_cut(x: &[f64], i: usize, inst: &Instance) -> Result<BendersCut> {
    let (beta, blocker) = beta_with_blockers(x, i, inst);
    let kd = knapsack_dual(&beta, i, inst)?;
    let mut intercept = kd.lambda;
    let mut coeffs = vec![0.0; x.len()];
    for (j, &eta) in kd.eta.iter().enumerate() {
        if eta <= 0.0 {
            continue;
        }
        match blocker[j] {
            Some(k) if beta[j] != x[j] => {
                intercept += eta;
                coeffs[k] -= eta;
            }
            _ => coeffs[j] += eta,
        }
    }
    Ok(BendersCut { scenario: i, intercept, coeffs })
}


/// Violation above which a pooled cut goes back into the LP.
const POOL_TOL: f64 = 1e-9;

/// Relative slack above which an LP cut counts as idle.
const PURGE_SLACK: f64 = 1e-6;

/// Optima a cut must stay idle before it may be pooled.
const PURGE_AGE: u32 = 1;

/// Pooling starts once the LP holds this many cuts per master column.
const PURGE_ABOVE: usize = 1;

/// Relaxed or restricted master LP over `(x, θ)`.
///
/// Every generated cut is kept. Cuts that are slack at an optimum may be
/// moved out of the LP into a pool once the LP grows large; the pool is
/// checked after each solve, so solutions satisfy all cuts.
pub struct MasterLp {
    lp: Simplex,
    n_options: usize,
    n_scenarios: usize,
    cuts: Vec<BendersCut>,
    /// LP row of each cut while it is in the LP.
    cut_row: Vec<Option<usize>>,
    /// Consecutive optima at which each cut was slack.
    slack_age: Vec<u32>,
    n_active: usize,
    seen: HashSet<(usize, Vec<i64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
}

impl MasterLp {
    pub fn new(inst: &Instance) -> Result<Self> {
        let space = inst.space();
        let m = space.n_options;
        let n = inst.n_scenarios();
        let mut p = LpProblem::new();
        for j in 0..m {
            let lo = if space.is_fixed(j) { 1.0 } else { 0.0 };
            p.add_var(0.0, lo, 1.0);
        }
        let w = 1.0 / n as f64;
        for i in 0..n {
            let r = inst.scenarios().r_row(i);
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            p.add_var(w, lo, hi);
        }
        for (rows, kind) in [(&space.ineq, RowKind::Le), (&space.eq, RowKind::Eq)] {
            for row in rows {
                let coeffs = row.coeffs.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(j, &a)| (j, a)).collect();
                p.add_row(coeffs, kind, row.rhs);
            }
        }
        Ok(Self {
            lp: Simplex::new(&p)?,
            n_options: m,
            n_scenarios: n,
            cuts: Vec::new(),
            cut_row: Vec::new(),
            slack_age: Vec::new(),
            n_active: 0,
            seen: HashSet::new(),
        })
    }

    pub fn theta_index(&self, i: usize) -> usize {
        self.n_options + i
    }

    /// Adds a cut unless an identical one is already present.
    pub fn add_cut(&mut self, cut: BendersCut) -> Result<bool> {
        if cut.scenario >= self.n_scenarios || cut.coeffs.len() != self.n_options {
            return Err(Error::InvalidInstance("cut does not match the master".into()));
        }
        if !self.seen.insert(cut.key()) {
            return Ok(false);
        }
        self.cuts.push(cut);
        self.cut_row.push(None);
        self.slack_age.push(0);
        self.activate(self.cuts.len() - 1)?;
        Ok(true)
    }

    fn activate(&mut self, c: usize) -> Result<()> {
        let cut = &self.cuts[c];
        let mut coeffs = vec![(self.theta_index(cut.scenario), 1.0)];
        coeffs.extend(cut.coeffs.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(j, &a)| (j, -a)));
        let row = self.lp.add_row(&LpRow::new(coeffs, RowKind::Le, cut.intercept))?;
        self.cut_row[c] = Some(row);
        self.slack_age[c] = 0;
        self.n_active += 1;
        Ok(())
    }

    /// Ages the LP cuts at an optimum and, once the LP is large, moves cuts
    /// that stayed slack for a while into the pool.
    fn age_and_purge(&mut self, x: &[f64], theta: &[f64]) {
        let mut rows = Vec::new();
        let purge = self.n_active > PURGE_ABOVE * (self.n_scenarios + self.n_options);
        for (c, cut) in self.cuts.iter().enumerate() {
            let Some(row) = self.cut_row[c] else {
                continue;
            };
            if -cut.violation(x, theta[cut.scenario]) > PURGE_SLACK && self.lp.row_is_slack(row) {
                self.slack_age[c] += 1;
                if purge && self.slack_age[c] >= PURGE_AGE {
                    rows.push(row);
                }
            } else {
                self.slack_age[c] = 0;
            }
        }
        if rows.is_empty() {
            return;
        }
        let map = self.lp.remove_rows(&rows);
        let mut active = 0;
        for slot in self.cut_row.iter_mut() {
            if let Some(row) = *slot {
                *slot = map[row];
                active += slot.is_some() as usize;
            }
        }
        log::trace!("master: pooled {} cuts, {active} remain in the LP", self.n_active - active);
        self.n_active = active;
    }

    pub fn cuts(&self) -> &[BendersCut] {
        &self.cuts
    }

    pub fn n_cuts(&self) -> usize {
        self.cuts.len()
    }

    /// Cuts currently in the LP (the rest sit in the pool).
    pub fn n_active_cuts(&self) -> usize {
        self.n_active
    }

    pub fn x_bounds(&self, j: usize) -> (f64, f64) {
        self.lp.bounds(j)
    }

    pub fn set_x_bounds(&mut self, j: usize, lo: f64, hi: f64) -> Result<()> {
        self.lp.set_bounds(j, lo, hi)
    }

    /// Stops later solves early once their bound drops below `cutoff`.
    pub fn set_cutoff(&mut self, cutoff: Option<f64>) {
        self.lp.set_cutoff(cutoff);
    }

    /// Optimal master point over all cuts, or `None` when the current
    /// bounds are infeasible or the bound falls below the cutoff.
    pub fn solve(&mut self) -> Result<Option<MasterSolution>> {
        loop {
            let sol = self.lp.solve()?;
            match sol.status {
                LpStatus::Optimal => {
                    let x = sol.x[..self.n_options].to_vec();
                    let theta = sol.x[self.n_options..].to_vec();
                    // most violated pooled cut per scenario
                    let mut pick: Vec<Option<(usize, f64)>> = vec![None; self.n_scenarios];
                    for (c, cut) in self.cuts.iter().enumerate() {
                        if self.cut_row[c].is_some() {
                            continue;
                        }
                        let v = cut.violation(&x, theta[cut.scenario]);
                        if v > POOL_TOL && pick[cut.scenario].map_or(true, |(_, best)| v > best) {
                            pick[cut.scenario] = Some((c, v));
                        }
                    }
                    let mut restored = false;
                    for (c, _) in pick.into_iter().flatten() {
                        self.activate(c)?;
                        restored = true;
                    }
                    if restored {
                        continue;
                    }
                    self.age_and_purge(&x, &theta);
                    return Ok(Some(MasterSolution { objective: sol.objective, x, theta }));
                }
                LpStatus::Infeasible | LpStatus::Cutoff => return Ok(None),
                LpStatus::Unbounded => return Err(Error::Numerical("master LP reported unbounded".into())),
            }
        }
    }

    pub fn lp_iterations(&self) -> usize {
        self.lp.iterations()
    }
}

/// Fractional cuts at `x_sep` that cut off the master point `(x, θ)`.
pub fn separate_fractional(
    inst: &Instance,
    x_sep: &[f64],
    x: &[f64],
    theta: &[f64],
    mrv: f64,
) -> Result<Vec<BendersCut>> {
    let found: Vec<Result<Option<BendersCut>>> = (0..inst.n_scenarios())
        .into_par_iter()
        .map(|i| {
            let cut = fractional_cut(x_sep, i, inst)?;
            Ok((cut.violation(x, theta[i]) > mrv).then_some(cut))
        })
        .collect();
    found.into_iter().filter_map(|c| c.transpose()).collect()
}

/// Integer cuts at `x` violated by `θ` (all of them when `theta` is `None`).
pub fn separate_integer(
    inst: &Instance,
    x: &BinaryDecision,
    point: &[f64],
    theta: Option<&[f64]>,
    mrv: f64,
) -> Result<Vec<BendersCut>> {
    let found: Vec<Result<Option<BendersCut>>> = (0..inst.n_scenarios())
        .into_par_iter()
        .map(|i| {
            let cut = integer_cut(x, i, inst)?;
            Ok(match theta {
                Some(t) => (cut.violation(point, t[i]) > mrv).then_some(cut),
                None => Some(cut),
            })
        })
        .collect();
    found.into_iter().filter_map(|c| c.transpose()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizerConfig {
    pub enabled: bool,
    /// Initial center; a default interior point is used when absent.
    pub center: Option<Vec<f64>>,
    pub initial_step: f64,
    pub step_increment: f64,
}

impl Default for StabilizerConfig {
    fn default() -> Self {
        Self { enabled: false, center: None, initial_step: 0.5, step_increment: 0.05 }
    }
}

impl StabilizerConfig {
    pub fn on() -> Self {
        Self { enabled: true, ..Self::default() }
    }

    /// Step size `ϱ` used at iteration `t` (1-based).
    pub fn step(&self, t: usize) -> f64 {
        if !self.enabled {
            return 1.0;
        }
        (self.initial_step + self.step_increment * (t.saturating_sub(1)) as f64).min(1.0)
    }
}

/// Interior point: fixed options at 1, the free cardinality budget spread
/// evenly over the free options.
pub fn default_center(space: &DecisionSpace) -> Vec<f64> {
    let n_free = space.n_free().max(1) as f64;
    let budget = space
        .cardinality()
        .map(|(rhs, _)| ((rhs + 1e-9).floor() - space.fixed_ones.len() as f64).max(0.0))
        .unwrap_or(n_free);
    let share = (budget / n_free).min(1.0);
    (0..space.n_options).map(|j| if space.is_fixed(j) { 1.0 } else { share }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Config {
    /// Relative gap tolerance `|UB − LB| / LB`.
    pub rho: f64,
    pub mrv: f64,
    pub max_iterations: usize,
    pub stabilizer: StabilizerConfig,
}

impl Stage1Config {
    /// Application default tolerance: 1e-2 for assortment, 1e-4 otherwise.
    pub fn for_space(space: &DecisionSpace) -> Self {
        let rho = match space.app_tag {
            crate::model::AppTag::Caop => 1e-2,
            _ => 1e-4,
        };
        Self { rho, ..Self::default() }
    }
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self { rho: 1e-4, mrv: DEFAULT_MRV, max_iterations: 500, stabilizer: StabilizerConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Result {
    pub cuts: Vec<BendersCut>,
    pub ub: f64,
    pub lb: f64,
    pub best: Option<BinaryDecision>,
    pub x_frac: Vec<f64>,
    pub iterations: usize,
    /// Step size used at each iteration.
    pub stabilizer_trace: Vec<f64>,
    pub ub_trace: Vec<f64>,
    /// Whether the gap tolerance (or an exhausted separation) ended the loop.
    pub converged: bool,
}

/// Greedy rounding for the application, falling back to the point itself
/// when it is already integral and feasible.
pub fn heuristic_point(space: &DecisionSpace, x: &[f64]) -> Option<BinaryDecision> {
    round_to_feasible(space.app_tag, x, space).ok().or_else(|| {
        BinaryDecision::from_integral(x, 1e-6).filter(|xr| space.is_feasible(xr))
    })
}

/// `|UB − LB| / LB ≤ ρ`, guarding tiny or negative `LB`.
pub fn gap_closed(ub: f64, lb: f64, rho: f64) -> bool {
    (ub - lb).abs() <= rho * lb.abs().max(1e-12) * (1.0 + 1e-12)
}

pub fn stage1(inst: &Instance, cfg: &Stage1Config) -> Result<Stage1Result> {
    let mut master = MasterLp::new(inst)?;
    stage1_on(inst, cfg, &mut master)
}

/// Cutting-plane loop on the LP relaxation of `master`, leaving every
/// generated cut in it.
pub fn stage1_on(inst: &Instance, cfg: &Stage1Config, master: &mut MasterLp) -> Result<Stage1Result> {
    stage1_until(inst, cfg, master, None)
}

/// As [`stage1_on`], stopping after the first iteration that ends past
/// `deadline`.
pub fn stage1_until(
    inst: &Instance,
    cfg: &Stage1Config,
    master: &mut MasterLp,
    deadline: Option<Instant>,
) -> Result<Stage1Result> {
    let space = inst.space();
    let mut center = if cfg.stabilizer.enabled {
        Some(cfg.stabilizer.center.clone().unwrap_or_else(|| default_center(space)))
    } else {
        None
    };
    let mut lb = f64::NEG_INFINITY;
    let mut best: Option<BinaryDecision> = None;
    let mut seen_rounded: HashSet<BinaryDecision> = HashSet::new();
    let mut trace = Vec::new();
    let mut ub_trace = Vec::new();
    let mut ub = f64::INFINITY;
    let mut x_frac = vec![0.0; space.n_options];
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=cfg.max_iterations {
        iterations = t;
        let sol = master.solve()?.ok_or(Error::InfeasibleSpace)?;
        ub = sol.objective;
        ub_trace.push(ub);
        x_frac = sol.x.clone();

        if let Some(xr) = heuristic_point(space, &sol.x) {
            if seen_rounded.insert(xr.clone()) {
                let v = sample_objective(&xr, inst)?;
                if v > lb {
                    lb = v;
                    best = Some(xr);
                }
            }
        }
        if best.is_some() && gap_closed(ub, lb, cfg.rho) {
            converged = true;
            break;
        }

        let step = cfg.stabilizer.step(t);
        trace.push(step);
        let mut cuts = Vec::new();
        if let Some(c) = center.as_mut() {
            let x_sep: Vec<f64> = sol.x.iter().zip(c.iter()).map(|(a, b)| step * a + (1.0 - step) * b).collect();
            for (cj, sj) in c.iter_mut().zip(&x_sep) {
                *cj = 0.5 * (*cj + sj);
            }
            cuts = separate_fractional(inst, &x_sep, &sol.x, &sol.theta, cfg.mrv)?;
        }
        if cuts.is_empty() {
            cuts = separate_fractional(inst, &sol.x, &sol.x, &sol.theta, cfg.mrv)?;
        }
        let mut added = 0;
        for cut in cuts {
            if master.add_cut(cut)? {
                added += 1;
            }
        }
        log::debug!("stage 1 iteration {t}: UB {ub:.6} LB {lb:.6} cuts +{added}");
        if added == 0 {
            converged = true;
            break;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
    }
    if !converged {
        log::warn!("stage 1 stopped at the iteration cap ({}) with UB {ub} and LB {lb}", cfg.max_iterations);
    }
    Ok(Stage1Result {
        cuts: master.cuts().to_vec(),
        ub,
        lb,
        best,
        x_frac,
        iterations,
        stabilizer_trace: trace,
        ub_trace,
        converged,
    })
}
