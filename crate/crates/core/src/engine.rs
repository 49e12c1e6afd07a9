//! Branch-and-cut over the offer vector, either on the Benders master
//! (cuts added lazily) or on the full extensive formulation with choice
//! variables, plus exhaustive enumeration for small spaces.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::apps::{round_to_feasible, AppParams};
use crate::benders::{
    default_center, heuristic_point, separate_fractional, separate_integer, stage1_until, MasterLp, Stage1Config,
    StabilizerConfig,
    DEFAULT_MRV,
};
use crate::error::{Error, Result};
use crate::model::{enumerate_feasible, sample_objective, BinaryDecision, Instance};
use crate::simplex::{LpProblem, LpStatus, RowKind, Simplex};

/// Choice-variable count above which the extensive form is refused.
pub const DEFAULT_EXTENSIVE_CAP: usize = 250_000;

/// Violation tolerance for lazy cuts at integer nodes.
const LAZY_TOL: f64 = 1e-9;

/// Relative slack under which a node cannot beat the incumbent.
const PRUNE_TOL: f64 = 1e-9;

const ROOT_ROUNDS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Sbbd,
    Extensive,
    Enum,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sbbd => "SBBD",
            Method::Extensive => "EXTENSIVE",
            Method::Enum => "ENUM",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sbbd" => Ok(Method::Sbbd),
            "extensive" | "milp" => Ok(Method::Extensive),
            "enum" | "enumerate" => Ok(Method::Enum),
            other => Err(Error::InvalidParams(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub method: Method,
    pub time_limit_s: f64,
    pub mrv: f64,
    /// Heuristic separation runs every this many nodes after the root.
    pub heuristic_period: usize,
    pub int_tol: f64,
    /// Stage-one settings; the application default is used when absent.
    pub stage1: Option<Stage1Config>,
    pub seed: u64,
    pub extensive_cap: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            method: Method::Sbbd,
            time_limit_s: 3600.0,
            mrv: DEFAULT_MRV,
            heuristic_period: 200,
            int_tol: 1e-6,
            stage1: None,
            seed: 0,
            extensive_cap: DEFAULT_EXTENSIVE_CAP,
        }
    }
}

impl SolveConfig {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    /// Defaults for an application: stage one is stabilized on probit
    /// assortment and on assortment with 200 or more products.
    pub fn for_params(params: &AppParams) -> Self {
        let stabilize = match params {
            AppParams::CaopProbit(_) => true,
            AppParams::CaopExponomial(p) => p.n_products >= 200,
            _ => false,
        };
        let stage1 = stabilize.then(|| Stage1Config { rho: 1e-2, stabilizer: StabilizerConfig::on(), ..Stage1Config::default() });
        Self { stage1, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.time_limit_s > 0.0) || !(self.mrv >= 0.0) || self.heuristic_period == 0 || !(self.int_tol > 0.0) {
            return Err(Error::InvalidParams("solve limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "OPTIMAL",
            SolveStatus::TimeLimit => "TIME_LIMIT",
            SolveStatus::Infeasible => "INFEASIBLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub t_seconds: f64,
    pub nodes: usize,
    pub cuts: usize,
    pub rgap_percent: f64,
    pub ogap_percent: f64,
    /// Relaxation bound after the root cut passes.
    pub root_bound: f64,
    pub stage1_iterations: usize,
    pub lp_iterations: usize,
    /// Integer nodes whose choice variables came out fractional.
    pub y_integrality_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: BinaryDecision,
    pub objective: f64,
    pub bound: f64,
    pub stats: SolveStats,
    pub status: SolveStatus,
}

impl Solution {
    /// Everything except wall-clock time, for reproducibility checks.
    pub fn fingerprint(&self) -> String {
        let s = &self.stats;
        format!(
            "{}|{:.12}|{:.12}|{}|{}|{:.12}|{:.12}|{:?}",
            self.x, self.objective, self.bound, s.nodes, s.cuts, s.rgap_percent, s.ogap_percent, self.status
        )
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub instance: String,
    pub method: String,
    pub t_s: f64,
    pub nodes: usize,
    pub cuts: usize,
    pub rgap_pct: f64,
    pub ogap_pct: f64,
    pub objective: f64,
    pub bound: f64,
    pub status: String,
}

impl SolveRecord {
    pub fn new(instance: &str, method: Method, sol: &Solution) -> Self {
        Self {
            instance: instance.to_string(),
            method: method.as_str().to_string(),
            t_s: sol.stats.t_seconds,
            nodes: sol.stats.nodes,
            cuts: sol.stats.cuts,
            rgap_pct: sol.stats.rgap_percent,
            ogap_pct: sol.stats.ogap_percent,
            objective: sol.objective,
            bound: sol.bound,
            status: sol.status.as_str().to_string(),
        }
    }
}

/// `(bound − objective) / bound · 100`.
pub fn gap_percent(bound: f64, objective: f64) -> f64 {
    let diff = bound - objective;
    if diff.abs() <= 1e-12 * bound.abs().max(1.0) {
        0.0
    } else {
        diff / bound.abs().max(1e-12) * 100.0
    }
}

/// Most fractional entry (closest to 0.5), lowest index on ties; `None`
/// when `x` is integral within `tol`.
pub fn branch_select(x: &[f64], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in x.iter().enumerate() {
        let frac = (v - v.round()).abs();
        if frac <= tol {
            continue;
        }
        let dist = (v - 0.5).abs();
        if best.map_or(true, |(_, d)| dist < d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

pub fn solve(inst: &Instance, cfg: &SolveConfig) -> Result<Solution> {
    match cfg.method {
        Method::Sbbd => solve_sbbd(inst, cfg),
        Method::Extensive => solve_extensive(inst, cfg),
        Method::Enum => solve_enum(inst, cfg),
    }
}

pub fn solve_enum(inst: &Instance, _cfg: &SolveConfig) -> Result<Solution> {
    let start = Instant::now();
    let mut best: Option<(BinaryDecision, f64)> = None;
    let mut count = 0;
    for x in enumerate_feasible(inst.space())? {
        count += 1;
        let v = sample_objective(&x, inst)?;
        if best.as_ref().map_or(true, |(bx, bv)| v > *bv || (v == *bv && x < *bx)) {
            best = Some((x, v));
        }
    }
    let (x, objective) = best.ok_or(Error::InfeasibleSpace)?;
    Ok(Solution {
        x,
        objective,
        bound: objective,
        stats: SolveStats {
            t_seconds: start.elapsed().as_secs_f64(),
            nodes: count,
            cuts: 0,
            rgap_percent: 0.0,
            ogap_percent: 0.0,
            root_bound: objective,
            stage1_iterations: 0,
            lp_iterations: 0,
            y_integrality_violations: 0,
        },
        status: SolveStatus::Optimal,
    })
}

/// Node LP outcome.
struct NodeLp {
    objective: f64,
    x: Vec<f64>,
    /// Scenario values `θ` (Benders master only).
    theta: Vec<f64>,
}

/// What the tree search needs from a relaxation.
trait Relaxation {
    fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> Result<()>;
    /// Lets `solve` give up once the bound is below `cutoff`.
    fn set_cutoff(&mut self, cutoff: Option<f64>);
    /// `None` when infeasible or cut off.
    fn solve(&mut self) -> Result<Option<NodeLp>>;
    /// Lazy constraints at an integral point; returns how many were added.
    fn lazy(&mut self, x: &BinaryDecision, lp: &NodeLp) -> Result<usize>;
    /// Cuts at a fractional point (root passes only).
    fn fractional(&mut self, lp: &NodeLp) -> Result<usize>;
    /// Cuts at a rounded point violated by the node solution.
    fn heuristic_cuts(&mut self, xr: &BinaryDecision, lp: &NodeLp) -> Result<usize>;
    /// Integrality check on auxiliary variables at an integral point.
    fn auxiliary_integral(&self, _lp: &NodeLp) -> bool {
        true
    }
    fn n_cuts(&self) -> usize;
    fn lp_iterations(&self) -> usize;
}

struct BendersRelaxation<'a> {
    inst: &'a Instance,
    master: MasterLp,
    mrv: f64,
}

impl Relaxation for BendersRelaxation<'_> {
    fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> Result<()> {
        self.master.set_x_bounds(j, lo, hi)
    }

    fn set_cutoff(&mut self, cutoff: Option<f64>) {
        self.master.set_cutoff(cutoff);
    }

    fn solve(&mut self) -> Result<Option<NodeLp>> {
        Ok(self.master.solve()?.map(|s| NodeLp { objective: s.objective, x: s.x, theta: s.theta }))
    }

    fn lazy(&mut self, x: &BinaryDecision, lp: &NodeLp) -> Result<usize> {
        let cuts = separate_integer(self.inst, x, &lp.x, Some(&lp.theta), LAZY_TOL)?;
        add_all(&mut self.master, cuts)
    }

    fn fractional(&mut self, lp: &NodeLp) -> Result<usize> {
        let cuts = separate_fractional(self.inst, &lp.x, &lp.x, &lp.theta, self.mrv)?;
        add_all(&mut self.master, cuts)
    }

    fn heuristic_cuts(&mut self, xr: &BinaryDecision, lp: &NodeLp) -> Result<usize> {
        let cuts = separate_integer(self.inst, xr, &lp.x, Some(&lp.theta), self.mrv)?;
        add_all(&mut self.master, cuts)
    }

    fn n_cuts(&self) -> usize {
        self.master.n_cuts()
    }

    fn lp_iterations(&self) -> usize {
        self.master.lp_iterations()
    }
}

fn add_all(master: &mut MasterLp, cuts: Vec<crate::benders::BendersCut>) -> Result<usize> {
    let mut added = 0;
    for c in cuts {
        if master.add_cut(c)? {
            added += 1;
        }
    }
    Ok(added)
}

struct ExtensiveRelaxation {
    lp: Simplex,
    n_options: usize,
    n_scenarios: usize,
    int_tol: f64,
    last_y: Vec<f64>,
}

impl ExtensiveRelaxation {
    /// Full LP over `(x, y)`; `preference_rows = false` drops the rows that
    /// tie choices to utilities, leaving each scenario free to take its
    /// best-paying offered option.
    fn new(inst: &Instance, cap: usize, preference_rows: bool) -> Result<Self> {
        let m = inst.n_options();
        let n = inst.n_scenarios();
        let size = n * m;
        if size > cap {
            return Err(Error::SizeCap { size, cap });
        }
        let space = inst.space();
        let mut p = LpProblem::new();
        for j in 0..m {
            p.add_var(0.0, if space.is_fixed(j) { 1.0 } else { 0.0 }, 1.0);
        }
        let w = 1.0 / n as f64;
        for i in 0..n {
            for j in 0..m {
                p.add_var(w * inst.scenarios().r(i, j), 0.0, 1.0);
            }
        }
        let y = |i: usize, j: usize| m + i * m + j;
        for (rows, kind) in [(&space.ineq, RowKind::Le), (&space.eq, RowKind::Eq)] {
            for row in rows {
                let coeffs = row.coeffs.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(j, &a)| (j, a)).collect();
                p.add_row(coeffs, kind, row.rhs);
            }
        }
        for i in 0..n {
            p.add_row((0..m).map(|j| (y(i, j), 1.0)).collect(), RowKind::Eq, 1.0);
            for j in 0..m {
                p.add_row(vec![(y(i, j), 1.0), (j, -1.0)], RowKind::Le, 0.0);
            }
            if !preference_rows {
                continue;
            }
            // options ranked below k cannot be chosen when k is offered
            let rank = inst.ranking(i);
            for (t, &k) in rank.iter().enumerate() {
                if t + 1 == m {
                    continue;
                }
                let mut coeffs: Vec<(usize, f64)> = rank[t + 1..].iter().map(|&j| (y(i, j as usize), 1.0)).collect();
                coeffs.push((k as usize, 1.0));
                p.add_row(coeffs, RowKind::Le, 1.0);
            }
        }
        Ok(Self { lp: Simplex::new(&p)?, n_options: m, n_scenarios: n, int_tol: 1e-6, last_y: Vec::new() })
    }
}

impl Relaxation for ExtensiveRelaxation {
    fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> Result<()> {
        self.lp.set_bounds(j, lo, hi)
    }

    fn set_cutoff(&mut self, cutoff: Option<f64>) {
        self.lp.set_cutoff(cutoff);
    }

    fn solve(&mut self) -> Result<Option<NodeLp>> {
        let sol = self.lp.solve()?;
        match sol.status {
            LpStatus::Optimal => {
                self.last_y = sol.x[self.n_options..].to_vec();
                Ok(Some(NodeLp { objective: sol.objective, x: sol.x[..self.n_options].to_vec(), theta: vec![] }))
            }
            LpStatus::Infeasible | LpStatus::Cutoff => Ok(None),
            LpStatus::Unbounded => Err(Error::Numerical("extensive LP reported unbounded".into())),
        }
    }

    fn lazy(&mut self, _x: &BinaryDecision, _lp: &NodeLp) -> Result<usize> {
        Ok(0)
    }

    fn fractional(&mut self, _lp: &NodeLp) -> Result<usize> {
        Ok(0)
    }

    fn heuristic_cuts(&mut self, _xr: &BinaryDecision, _lp: &NodeLp) -> Result<usize> {
        Ok(0)
    }

    fn auxiliary_integral(&self, _lp: &NodeLp) -> bool {
        debug_assert_eq!(self.last_y.len(), self.n_scenarios * self.n_options);
        self.last_y.iter().all(|&v| v.abs() <= self.int_tol || (v - 1.0).abs() <= self.int_tol)
    }

    fn n_cuts(&self) -> usize {
        0
    }

    fn lp_iterations(&self) -> usize {
        self.lp.iterations()
    }
}

#[derive(Debug)]
struct Node {
    bound: f64,
    seq: usize,
    /// -1 free, 0 or 1 fixed.
    fix: Vec<i8>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    x: Option<BinaryDecision>,
    value: f64,
}

impl Incumbent {
    fn offer(&mut self, x: BinaryDecision, v: f64) -> bool {
        if self.x.is_none() || v > self.value {
            self.x = Some(x);
            self.value = v;
            true
        } else {
            false
        }
    }

    fn beats(&self, bound: f64) -> bool {
        self.x.is_some() && bound <= self.value + PRUNE_TOL * self.value.abs().max(1.0)
    }
}

struct Search<'a, R: Relaxation> {
    inst: &'a Instance,
    cfg: &'a SolveConfig,
    relax: R,
    inc: Incumbent,
    deadline: Instant,
    nodes: usize,
    y_violations: usize,
}

enum NodeOutcome {
    Pruned,
    Integral,
    Branch { j: usize, value: f64, bound: f64 },
    OutOfTime { bound: f64 },
}

impl<R: Relaxation> Search<'_, R> {
    fn out_of_time(&self) -> bool {
        Instant::now() >= self.deadline
    }

    fn try_heuristic(&mut self, lp: &NodeLp, with_cuts: bool) -> Result<usize> {
        let Some(xr) = heuristic_point(self.inst.space(), &lp.x) else {
            return Ok(0);
        };
        let v = sample_objective(&xr, self.inst)?;
        self.inc.offer(xr.clone(), v);
        if with_cuts {
            self.relax.heuristic_cuts(&xr, lp)
        } else {
            Ok(0)
        }
    }

    fn apply(&mut self, fix: &[i8]) -> Result<()> {
        let space = self.inst.space();
        for (j, &f) in fix.iter().enumerate() {
            let base_lo = if space.is_fixed(j) { 1.0 } else { 0.0 };
            let (lo, hi) = match f {
                0 => (base_lo, 0.0f64.max(base_lo)),
                1 => (1.0, 1.0),
                _ => (base_lo, 1.0),
            };
            self.relax.set_bounds(j, lo, hi)?;
        }
        Ok(())
    }

    /// Solves a node to an integral point, a branching decision or a prune.
    fn process(&mut self, heuristic_now: bool) -> Result<NodeOutcome> {
        let mut heuristic_pending = heuristic_now;
        loop {
            self.relax.set_cutoff(self.inc.x.as_ref().map(|_| self.inc.value));
            let Some(lp) = self.relax.solve()? else {
                return Ok(NodeOutcome::Pruned);
            };
            if self.inc.beats(lp.objective) {
                return Ok(NodeOutcome::Pruned);
            }
            if self.out_of_time() {
                return Ok(NodeOutcome::OutOfTime { bound: lp.objective });
            }
            match branch_select(&lp.x, self.cfg.int_tol) {
                None => {
                    let xr = BinaryDecision::from_integral(&lp.x, self.cfg.int_tol)
                        .ok_or_else(|| Error::Numerical("integral node did not round".into()))?;
                    if self.relax.lazy(&xr, &lp)? > 0 {
                        continue;
                    }
                    if !self.relax.auxiliary_integral(&lp) {
                        self.y_violations += 1;
                        log::error!("fractional choice variables at integer node {xr}");
                    }
                    let v = sample_objective(&xr, self.inst)?;
                    self.inc.offer(xr, v);
                    return Ok(NodeOutcome::Integral);
                }
                Some(j) => {
                    if heuristic_pending {
                        heuristic_pending = false;
                        if self.try_heuristic(&lp, true)? > 0 {
                            continue;
                        }
                        if self.inc.beats(lp.objective) {
                            return Ok(NodeOutcome::Pruned);
                        }
                    }
                    return Ok(NodeOutcome::Branch { j, value: lp.x[j], bound: lp.objective });
                }
            }
        }
    }

    /// Root cut passes; returns the root bound.
    fn root(&mut self) -> Result<f64> {
        let mut bound = f64::INFINITY;
        self.relax.set_cutoff(None);
        for _round in 0..ROOT_ROUNDS {
            let lp = self.relax.solve()?.ok_or(Error::InfeasibleSpace)?;
            bound = lp.objective;
            if self.out_of_time() {
                break;
            }
            let added = match branch_select(&lp.x, self.cfg.int_tol) {
                None => {
                    let xr = BinaryDecision::from_integral(&lp.x, self.cfg.int_tol)
                        .ok_or_else(|| Error::Numerical("integral root did not round".into()))?;
                    self.relax.lazy(&xr, &lp)?
                }
                Some(_) => {
                    let f = self.relax.fractional(&lp)?;
                    f + self.try_heuristic(&lp, true)?
                }
            };
            if added == 0 {
                break;
            }
        }
        Ok(bound)
    }

    fn run(&mut self, start: Instant, stage1_iterations: usize, stage1_bound: Option<f64>) -> Result<Solution> {
        let m = self.inst.n_options();
        let mut open_bound = stage1_bound.unwrap_or(f64::INFINITY);
        let mut timed_out = self.out_of_time();
        let mut root_bound = open_bound;
        if !timed_out {
            root_bound = self.root()?;
            open_bound = root_bound;
        }
        let mut heap: BinaryHeap<Node> = BinaryHeap::new();
        let mut seq = 0usize;
        let mut current: Option<Node> = if timed_out { None } else { Some(Node { bound: root_bound, seq, fix: vec![-1; m] }) };
        let mut pending_bound = f64::NEG_INFINITY;
        loop {
            let node = match current.take() {
                Some(n) => n,
                None => match heap.pop() {
                    Some(n) => {
                        if self.inc.beats(n.bound) {
                            continue;
                        }
                        n
                    }
                    None => break,
                },
            };
            if self.out_of_time() {
                pending_bound = pending_bound.max(node.bound);
                timed_out = true;
                break;
            }
            self.apply(&node.fix)?;
            self.nodes += 1;
            let heuristic_now = self.nodes > 1 && self.nodes % self.cfg.heuristic_period == 0;
            match self.process(heuristic_now)? {
                NodeOutcome::Pruned | NodeOutcome::Integral => {}
                NodeOutcome::OutOfTime { bound } => {
                    pending_bound = pending_bound.max(bound.min(node.bound));
                    timed_out = true;
                    break;
                }
                NodeOutcome::Branch { j, value, bound } => {
                    let bound = bound.min(node.bound);
                    let mut down = node.fix.clone();
                    down[j] = 0;
                    let mut up = node.fix;
                    up[j] = 1;
                    seq += 1;
                    let down = Node { bound, seq, fix: down };
                    seq += 1;
                    let up = Node { bound, seq, fix: up };
                    let (dive, park) = if value >= 0.5 { (up, down) } else { (down, up) };
                    heap.push(park);
                    current = Some(dive);
                }
            }
        }
        let x = match self.inc.x.clone() {
            Some(x) => x,
            None if timed_out => return Err(Error::Numerical("no feasible decision found before the time limit".into())),
            None => return Err(Error::InfeasibleSpace),
        };
        let objective = self.inc.value;
        let bound = if timed_out {
            let mut b = pending_bound;
            if let Some(n) = current.as_ref() {
                b = b.max(n.bound);
            }
            for n in heap.iter() {
                b = b.max(n.bound);
            }
            if !b.is_finite() {
                b = open_bound;
            }
            b.min(open_bound).max(objective)
        } else {
            objective
        };
        let ogap = gap_percent(bound, objective);
        let status = if ogap < 0.01 { SolveStatus::Optimal } else { SolveStatus::TimeLimit };
        Ok(Solution {
            x,
            objective,
            bound,
            stats: SolveStats {
                t_seconds: start.elapsed().as_secs_f64(),
                nodes: self.nodes,
                cuts: self.relax.n_cuts(),
                rgap_percent: gap_percent(root_bound.max(objective), objective),
                ogap_percent: ogap,
                root_bound,
                stage1_iterations,
                lp_iterations: self.relax.lp_iterations(),
                y_integrality_violations: self.y_violations,
            },
            status,
        })
    }
}

fn deadline(start: Instant, cfg: &SolveConfig) -> Instant {
    start + Duration::from_secs_f64(cfg.time_limit_s.min(1e9))
}

/// Initial incumbent from rounding the default interior point.
fn seed_incumbent(inst: &Instance, inc: &mut Incumbent) -> Result<()> {
    let space = inst.space();
    if let Ok(x) = round_to_feasible(space.app_tag, &default_center(space), space) {
        let v = sample_objective(&x, inst)?;
        inc.offer(x, v);
    }
    Ok(())
}

pub fn solve_sbbd(inst: &Instance, cfg: &SolveConfig) -> Result<Solution> {
    cfg.validate()?;
    let start = Instant::now();
    let deadline = deadline(start, cfg);
    let mut master = MasterLp::new(inst)?;
    let mut inc = Incumbent { x: None, value: f64::NEG_INFINITY };
    seed_incumbent(inst, &mut inc)?;
    let s1cfg = cfg.stage1.clone().unwrap_or_else(|| Stage1Config::for_space(inst.space()));
    let s1 = stage1_until(inst, &s1cfg, &mut master, Some(deadline))?;
    if let Some(x) = s1.best.clone() {
        inc.offer(x, s1.lb);
    }
    let relax = BendersRelaxation { inst, master, mrv: cfg.mrv };
    let mut search = Search { inst, cfg, relax, inc, deadline, nodes: 0, y_violations: 0 };
    search.run(start, s1.iterations, Some(s1.ub))
}

pub fn solve_extensive(inst: &Instance, cfg: &SolveConfig) -> Result<Solution> {
    extensive_search(inst, cfg, true)
}

/// Extensive form without the preference rows. Its optimum equals the
/// full model's whenever every feasible offer makes every scenario
/// cooperative, as in market-share facility location.
pub fn solve_reduced(inst: &Instance, cfg: &SolveConfig) -> Result<Solution> {
    extensive_search(inst, cfg, false)
}

fn extensive_search(inst: &Instance, cfg: &SolveConfig, preference_rows: bool) -> Result<Solution> {
    cfg.validate()?;
    let start = Instant::now();
    let deadline = deadline(start, cfg);
    let mut relax = ExtensiveRelaxation::new(inst, cfg.extensive_cap, preference_rows)?;
    relax.int_tol = cfg.int_tol;
    let mut inc = Incumbent { x: None, value: f64::NEG_INFINITY };
    seed_incumbent(inst, &mut inc)?;
    let mut search = Search { inst, cfg, relax, inc, deadline, nodes: 0, y_violations: 0 };
    search.run(start, 0, None)
}
