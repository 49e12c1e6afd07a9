//! Problem representation: decision polyhedron, realized scenarios and the
//! rank-list choice rule they induce.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::Scheme;

/// Tolerance used when checking linear constraints on 0/1 points.
pub const FEAS_TOL: f64 = 1e-9;

/// Default cap on free binaries for exhaustive enumeration.
pub const ENUMERATION_CAP: usize = 24;

/// Utilities closer than this inside one scenario count as tied.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AppTag {
    Caop,
    Flop,
    Msmflp,
    Generic,
}

impl std::str::FromStr for AppTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CAOP" => Ok(AppTag::Caop),
            "FLOP" => Ok(AppTag::Flop),
            "MSMFLP" => Ok(AppTag::Msmflp),
            "GENERIC" => Ok(AppTag::Generic),
            other => Err(Error::UnknownApp(other.to_string())),
        }
    }
}

/// One linear constraint row `coeffs · x (≤ or =) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    fn is_all_ones(&self) -> bool {
        self.coeffs.iter().all(|&a| a == 1.0)
    }
}

/// The planner's feasible offers `{x ∈ {0,1}^n : C x ≤ d, H x = g}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpace {
    pub n_options: usize,
    #[serde(default)]
    pub ineq: Vec<LinearRow>,
    #[serde(default)]
    pub eq: Vec<LinearRow>,
    #[serde(default)]
    pub fixed_ones: Vec<usize>,
    pub app_tag: AppTag,
    /// Options grouped per facility (location–pricing applications only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
}

impl DecisionSpace {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_options;
        if n == 0 {
            return Err(Error::InvalidInstance("decision space has no options".into()));
        }
        for row in self.ineq.iter().chain(&self.eq) {
            if row.coeffs.len() != n {
                return Err(Error::InvalidInstance(format!(
                    "constraint row has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidInstance("non-finite constraint data".into()));
            }
        }
        if let Some(&bad) = self.fixed_ones.iter().find(|&&j| j >= n) {
            return Err(Error::InvalidInstance(format!("fixed index {bad} out of range")));
        }
        if let Some(groups) = &self.groups {
            if groups.iter().flatten().any(|&j| j >= n) {
                return Err(Error::InvalidInstance("group index out of range".into()));
            }
        }
        Ok(())
    }

    pub fn is_fixed(&self, j: usize) -> bool {
        self.fixed_ones.contains(&j)
    }

    /// Feasibility of a (possibly fractional) point, including the unit box.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.n_options
            && x.iter().all(|&v| v >= -tol && v <= 1.0 + tol)
            && self.fixed_ones.iter().all(|&j| x[j] >= 1.0 - tol)
            && self.ineq.iter().all(|row| row.activity(x) <= row.rhs + tol)
            && self.eq.iter().all(|row| (row.activity(x) - row.rhs).abs() <= tol)
    }

    pub fn is_feasible(&self, x: &BinaryDecision) -> bool {
        self.contains(&x.to_f64(), FEAS_TOL)
    }

    /// Right-hand side of the first all-ones cardinality row, with whether
    /// it is an equality.
    pub fn cardinality(&self) -> Option<(f64, bool)> {
        if let Some(row) = self.eq.iter().find(|r| r.is_all_ones()) {
            return Some((row.rhs, true));
        }
        self.ineq.iter().find(|r| r.is_all_ones()).map(|r| (r.rhs, false))
    }

    pub fn n_free(&self) -> usize {
        (0..self.n_options).filter(|&j| !self.is_fixed(j)).count()
    }
}

/// A 0/1 offer vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryDecision(Vec<bool>);

impl BinaryDecision {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| b != 0).collect())
    }

    /// Rounds a point that is integral within `tol`; `None` otherwise.
    pub fn from_integral(x: &[f64], tol: f64) -> Option<Self> {
        x.iter()
            .map(|&v| {
                if (v - 1.0).abs() <= tol {
                    Some(true)
                } else if v.abs() <= tol {
                    Some(false)
                } else {
                    None
                }
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn set(&mut self, j: usize, on: bool) {
        self.0[j] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn offered(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }
}

impl Serialize for BinaryDecision {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_bits().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BinaryDecision {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bits = Vec::<u8>::deserialize(d)?;
        Ok(Self::from_bits(&bits))
    }
}

impl std::fmt::Display for BinaryDecision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Realized utilities and rewards, `n` rows of `n_options` columns each.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    n: usize,
    n_options: usize,
    u: Vec<f64>,
    r: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(n: usize, n_options: usize, u: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if u.len() != n * n_options || r.len() != n * n_options {
            return Err(Error::InvalidInstance(format!(
                "scenario matrices must be {n}x{n_options}"
            )));
        }
        if u.iter().chain(&r).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("non-finite utility or reward".into()));
        }
        Ok(Self { n, n_options, u, r })
    }

    pub fn from_rows(u: Vec<Vec<f64>>, r: Vec<Vec<f64>>) -> Result<Self> {
        let n = u.len();
        let n_options = u.first().map_or(0, Vec::len);
        if r.len() != n || u.iter().chain(&r).any(|row| row.len() != n_options) {
            return Err(Error::InvalidInstance("ragged scenario rows".into()));
        }
        Self::new(n, n_options, u.concat(), r.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_options(&self) -> usize {
        self.n_options
    }

    #[inline]
    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.n_options + j]
    }

    #[inline]
    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.n_options + j]
    }

    pub fn u_row(&self, i: usize) -> &[f64] {
        &self.u[i * self.n_options..(i + 1) * self.n_options]
    }

    pub fn r_row(&self, i: usize) -> &[f64] {
        &self.r[i * self.n_options..(i + 1) * self.n_options]
    }

    pub fn utilities(&self) -> &[f64] {
        &self.u
    }

    pub fn rewards(&self) -> &[f64] {
        &self.r
    }

    pub fn has_distinct_utilities(&self) -> bool {
        (0..self.n).all(|i| row_is_distinct(self.u_row(i)))
    }
}

fn row_is_distinct(row: &[f64]) -> bool {
    let mut sorted = row.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.windows(2).all(|w| w[1] - w[0] > TIE_EPS)
}

/// Breaks near-ties in one utility row by adding `k·1e-9·max(1,|u|)` to
/// every tied column `k`, repeating with a growing step if needed. Returns
/// whether the row was changed.
pub fn repair_ties(row: &mut [f64]) -> bool {
    let mut changed = false;
    let mut step = 1e-9;
    for _ in 0..16 {
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let mut tied = vec![false; row.len()];
        let mut any = false;
        for w in order.windows(2) {
            if row[w[1]] - row[w[0]] <= TIE_EPS {
                tied[w[0]] = true;
                tied[w[1]] = true;
                any = true;
            }
        }
        if !any {
            return changed;
        }
        for (k, v) in row.iter_mut().enumerate() {
            if tied[k] {
                *v += k as f64 * step * v.abs().max(1.0);
            }
        }
        changed = true;
        step *= 4.0;
    }
    changed
}

/// Where an instance came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    /// Scenario rows whose utilities received tie-breaking jitter.
    #[serde(default)]
    pub jittered_rows: Vec<usize>,
}

/// Decision space plus realized scenarios. Immutable once built.
#[derive(Debug, Clone)]
pub struct Instance {
    space: DecisionSpace,
    scenarios: ScenarioSet,
    provenance: Provenance,
    /// Per scenario, options ordered by the choice rule (best first).
    ranking: Vec<u32>,
    /// Per scenario, the rank of each option in `ranking`.
    position: Vec<u32>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.scenarios == other.scenarios && self.provenance == other.provenance
    }
}

impl Instance {
    pub fn new(space: DecisionSpace, scenarios: ScenarioSet, provenance: Provenance) -> Result<Self> {
        space.validate()?;
        if scenarios.n_options() != space.n_options {
            return Err(Error::InvalidInstance(format!(
                "scenarios have {} columns but the space has {} options",
                scenarios.n_options(),
                space.n_options
            )));
        }
        if scenarios.n() == 0 {
            return Err(Error::InvalidInstance("instance needs at least one scenario".into()));
        }
        let m = space.n_options;
        let mut ranking = Vec::with_capacity(scenarios.n() * m);
        for i in 0..scenarios.n() {
            let mut order: Vec<u32> = (0..m as u32).collect();
            order.sort_by(|&a, &b| choice_order(&scenarios, i, a as usize, b as usize));
            ranking.extend(order);
        }
        let mut position = vec![0u32; ranking.len()];
        for i in 0..scenarios.n() {
            for (t, &j) in ranking[i * m..(i + 1) * m].iter().enumerate() {
                position[i * m + j as usize] = t as u32;
            }
        }
        Ok(Self { space, scenarios, provenance, ranking, position })
    }

    /// Builds an instance and applies tie repair to the utilities first.
    pub fn with_tie_repair(space: DecisionSpace, n: usize, mut u: Vec<f64>, r: Vec<f64>, mut provenance: Provenance) -> Result<Self> {
        let m = space.n_options;
        provenance.jittered_rows.clear();
        for i in 0..n {
            if repair_ties(&mut u[i * m..(i + 1) * m]) {
                provenance.jittered_rows.push(i);
            }
        }
        let scenarios = ScenarioSet::new(n, m, u, r)?;
        Self::new(space, scenarios, provenance)
    }

    pub fn space(&self) -> &DecisionSpace {
        &self.space
    }

    pub fn scenarios(&self) -> &ScenarioSet {
        &self.scenarios
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn n_scenarios(&self) -> usize {
        self.scenarios.n()
    }

    pub fn n_options(&self) -> usize {
        self.space.n_options
    }

    /// Options of scenario `i`, most preferred first.
    pub fn ranking(&self, i: usize) -> &[u32] {
        let m = self.space.n_options;
        &self.ranking[i * m..(i + 1) * m]
    }

    /// Rank of every option in scenario `i` (0 = most preferred).
    pub fn positions(&self, i: usize) -> &[u32] {
        let m = self.space.n_options;
        &self.position[i * m..(i + 1) * m]
    }

    /// Whether option `k` is preferred to option `j` in scenario `i`.
    #[inline]
    pub fn prefers(&self, i: usize, k: usize, j: usize) -> bool {
        let p = self.positions(i);
        p[k] < p[j]
    }

    /// Largest realized reward of scenario `i`.
    pub fn max_reward(&self, i: usize) -> f64 {
        self.scenarios.r_row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_decision(&self, x: &BinaryDecision) -> Result<()> {
        if x.len() != self.n_options() {
            return Err(Error::InfeasibleDecision(format!(
                "decision has {} entries, expected {}",
                x.len(),
                self.n_options()
            )));
        }
        Ok(())
    }
}

/// Choice-rule order: higher utility, then higher reward, then lower index.
fn choice_order(s: &ScenarioSet, i: usize, a: usize, b: usize) -> Ordering {
    s.u(i, b)
        .total_cmp(&s.u(i, a))
        .then(s.r(i, b).total_cmp(&s.r(i, a)))
        .then(a.cmp(&b))
}

/// The option picked in scenario `i` under offer `x`, with its reward.
pub fn choose(x: &BinaryDecision, i: usize, inst: &Instance) -> Result<(usize, f64)> {
    inst.check_decision(x)?;
    if i >= inst.n_scenarios() {
        return Err(Error::InvalidInstance(format!("scenario {i} out of range")));
    }
    choose_unchecked(x, i, inst)
}

#[inline]
pub(crate) fn choose_unchecked(x: &BinaryDecision, i: usize, inst: &Instance) -> Result<(usize, f64)> {
    inst.ranking(i)
        .iter()
        .map(|&j| j as usize)
        .find(|&j| x.get(j))
        .map(|j| (j, inst.scenarios.r(i, j)))
        .ok_or(Error::EmptyOfferSet { scenario: i })
}

/// Sample-average reward of offer `x`.
pub fn sample_objective(x: &BinaryDecision, inst: &Instance) -> Result<f64> {
    inst.check_decision(x)?;
    let mut total = 0.0;
    for i in 0..inst.n_scenarios() {
        total += choose_unchecked(x, i, inst)?.1;
    }
    Ok(total / inst.n_scenarios() as f64)
}

/// Whether the chosen option in scenario `i` also carries the highest
/// reward among the offered ones.
pub fn is_cooperative(x: &BinaryDecision, i: usize, inst: &Instance) -> Result<bool> {
    let (_, reward) = choose_unchecked(x, i, inst)?;
    let best = x
        .offered()
        .map(|j| inst.scenarios.r(i, j))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(reward >= best)
}

/// Share of scenarios in which the utility-maximizing offered option is
/// also the reward-maximizing one.
pub fn cooperative_fraction(x: &BinaryDecision, inst: &Instance) -> Result<f64> {
    inst.check_decision(x)?;
    let mut count = 0usize;
    for i in 0..inst.n_scenarios() {
        if is_cooperative(x, i, inst)? {
            count += 1;
        }
    }
    Ok(count as f64 / inst.n_scenarios() as f64)
}

/// Iterator over every feasible 0/1 point of a decision space.
pub struct FeasibleIter<'a> {
    space: &'a DecisionSpace,
    free: Vec<usize>,
    next: u64,
    end: u64,
}

impl Iterator for FeasibleIter<'_> {
    type Item = BinaryDecision;

    fn next(&mut self) -> Option<BinaryDecision> {
        while self.next < self.end {
            let mask = self.next;
            self.next += 1;
            let mut x = BinaryDecision::zeros(self.space.n_options);
            for &j in &self.space.fixed_ones {
                x.set(j, true);
            }
            // free[0] is the most significant bit so masks ascend lexicographically
            let k = self.free.len();
            for (pos, &j) in self.free.iter().enumerate() {
                if mask >> (k - 1 - pos) & 1 == 1 {
                    x.set(j, true);
                }
            }
            if self.space.is_feasible(&x) {
                return Some(x);
            }
        }
        None
    }
}

pub fn enumerate_feasible(space: &DecisionSpace) -> Result<FeasibleIter<'_>> {
    enumerate_feasible_with_cap(space, ENUMERATION_CAP)
}

/// Feasible points in lexicographic order, refusing more than `cap` free binaries.
pub fn enumerate_feasible_with_cap(space: &DecisionSpace, cap: usize) -> Result<FeasibleIter<'_>> {
    space.validate()?;
    let free: Vec<usize> = (0..space.n_options).filter(|&j| !space.is_fixed(j)).collect();
    if free.len() > cap || free.len() >= 63 {
        return Err(Error::EnumerationCap { free: free.len(), cap });
    }
    let end = 1u64 << free.len();
    Ok(FeasibleIter { space, free, next: 0, end })
}

/// Exhaustive optimum of the sample-average problem. Ties go to the
/// lexicographically smallest decision.
pub fn enumerate_optimal(inst: &Instance) -> Result<(BinaryDecision, f64)> {
    let mut best: Option<(BinaryDecision, f64)> = None;
    for x in enumerate_feasible(inst.space())? {
        let v = sample_objective(&x, inst)?;
        let better = match &best {
            None => true,
            Some((bx, bv)) => v > *bv || (v == *bv && x < *bx),
        };
        if better {
            best = Some((x, v));
        }
    }
    best.ok_or(Error::InfeasibleSpace)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Three options (0 = outside), two scenarios; `x0 = 1`, `x1 + x2 ≤ 1`.
    pub fn e1() -> Instance {
        let space = DecisionSpace {
            n_options: 3,
            ineq: vec![LinearRow::new(vec![0.0, 1.0, 1.0], 1.0)],
            eq: vec![],
            fixed_ones: vec![0],
            app_tag: AppTag::Generic,
            groups: None,
        };
        let scen = ScenarioSet::from_rows(
            vec![vec![0.0, 2.0, 1.0], vec![0.0, 1.0, 3.0]],
            vec![vec![0.0, 5.0, 8.0], vec![0.0, 5.0, 8.0]],
        )
        .unwrap();
        Instance::new(space, scen, Provenance { generator: "e1".into(), ..Default::default() }).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::e1;
    use super::*;

    fn bd(bits: &[u8]) -> BinaryDecision {
        BinaryDecision::from_bits(bits)
    }

    #[test]
    fn choose_on_e1() {
        let inst = e1();
        assert_eq!(choose(&bd(&[1, 0, 1]), 0, &inst).unwrap(), (2, 8.0));
        assert_eq!(choose(&bd(&[1, 0, 0]), 0, &inst).unwrap(), (0, 0.0));
        assert_eq!(choose(&bd(&[1, 1, 1]), 0, &inst).unwrap(), (1, 5.0));
        assert!(matches!(choose(&bd(&[0, 0, 0]), 0, &inst), Err(Error::EmptyOfferSet { .. })));
        assert!(choose(&bd(&[1, 0, 0]), 2, &inst).is_err());
    }

    #[test]
    fn objective_on_e1() {
        let inst = e1();
        assert_eq!(sample_objective(&bd(&[1, 0, 1]), &inst).unwrap(), 8.0);
        assert_eq!(sample_objective(&bd(&[1, 1, 0]), &inst).unwrap(), 5.0);
        assert_eq!(sample_objective(&bd(&[1, 0, 0]), &inst).unwrap(), 0.0);
    }

    #[test]
    fn cooperative_on_e1() {
        let inst = e1();
        assert_eq!(cooperative_fraction(&bd(&[1, 0, 1]), &inst).unwrap(), 1.0);
        assert_eq!(cooperative_fraction(&bd(&[1, 1, 1]), &inst).unwrap(), 0.5);
    }

    #[test]
    fn enumeration_of_e1() {
        let inst = e1();
        let all: Vec<_> = enumerate_feasible(inst.space()).unwrap().collect();
        assert_eq!(all, vec![bd(&[1, 0, 0]), bd(&[1, 0, 1]), bd(&[1, 1, 0])]);
        let (x, v) = enumerate_optimal(&inst).unwrap();
        assert_eq!(x, bd(&[1, 0, 1]));
        assert_eq!(v, 8.0);
    }

    #[test]
    fn enumeration_counts() {
        let cube = DecisionSpace {
            n_options: 3,
            ineq: vec![],
            eq: vec![],
            fixed_ones: vec![0],
            app_tag: AppTag::Generic,
            groups: None,
        };
        assert_eq!(enumerate_feasible(&cube).unwrap().count(), 4);
        let pick_two = DecisionSpace {
            n_options: 3,
            ineq: vec![],
            eq: vec![LinearRow::new(vec![1.0; 3], 2.0)],
            fixed_ones: vec![],
            app_tag: AppTag::Msmflp,
            groups: None,
        };
        assert_eq!(enumerate_feasible(&pick_two).unwrap().count(), 3);
        let big = DecisionSpace { n_options: 30, ineq: vec![], eq: vec![], fixed_ones: vec![], app_tag: AppTag::Generic, groups: None };
        assert!(matches!(enumerate_feasible(&big), Err(Error::EnumerationCap { free: 30, cap: 24 })));
    }

    #[test]
    fn zero_rewards_pick_smallest_decision() {
        let base = e1();
        let scen = ScenarioSet::new(2, 3, base.scenarios().utilities().to_vec(), vec![0.0; 6]).unwrap();
        let inst = Instance::new(base.space().clone(), scen, Provenance::default()).unwrap();
        let (x, v) = enumerate_optimal(&inst).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(x, bd(&[1, 0, 0]));
    }

    #[test]
    fn utility_ties_resolve_by_reward_then_index() {
        let space = DecisionSpace { n_options: 3, ineq: vec![], eq: vec![], fixed_ones: vec![], app_tag: AppTag::Generic, groups: None };
        let scen = ScenarioSet::from_rows(vec![vec![1.0, 1.0, 1.0]], vec![vec![2.0, 3.0, 3.0]]).unwrap();
        let inst = Instance::new(space, scen, Provenance::default()).unwrap();
        assert_eq!(choose(&bd(&[1, 1, 1]), 0, &inst).unwrap(), (1, 3.0));
        assert_eq!(choose(&bd(&[1, 0, 1]), 0, &inst).unwrap(), (2, 3.0));
    }

    #[test]
    fn tie_repair_separates_rows() {
        let mut row = vec![0.5, 0.5, 0.2, 0.5];
        assert!(repair_ties(&mut row));
        assert!(row_is_distinct(&row));
        let mut big = vec![-1e9, -1e9, 0.3];
        assert!(repair_ties(&mut big));
        assert!(row_is_distinct(&big));
        let mut fine = vec![0.1, 0.2];
        assert!(!repair_ties(&mut fine));
    }

    #[test]
    fn infeasible_decisions_are_detected() {
        let inst = e1();
        assert!(!inst.space().is_feasible(&bd(&[1, 1, 1])));
        assert!(!inst.space().is_feasible(&bd(&[0, 1, 0])));
        assert!(inst.space().is_feasible(&bd(&[1, 1, 0])));
    }
}
