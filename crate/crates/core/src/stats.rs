//! Solution-quality estimates from independent sample-average replications.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apps::{evaluate_process, AppParams};
use crate::engine::{solve, SolveConfig};
use crate::error::{Error, Result};
use crate::model::BinaryDecision;
use crate::sampling::standard_normal_quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub scenario_seed: u64,
    pub n_scenarios: usize,
    pub objective: f64,
    pub x: BinaryDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub v_bar: f64,
    pub s2_vbar: f64,
    pub v_hat: f64,
    pub s2_vhat: f64,
    pub sigma2: f64,
    pub sigma: f64,
    pub delta_percent: f64,
    pub delta_alpha_percent: f64,
    pub alpha: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_prime")]
    pub n_prime: usize,
    pub best_x: BinaryDecision,
}

/// Flat row in the column order v̂, v̄, σ, Δ, Δ_α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub v_hat: f64,
    pub v_bar: f64,
    pub sigma: f64,
    pub delta_pct: f64,
    pub delta_alpha_pct: f64,
    pub s2_vbar: f64,
    pub s2_vhat: f64,
    pub alpha: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_prime")]
    pub n_prime: usize,
    pub best_x: String,
}

impl GapReport {
    pub fn row(&self) -> GapRow {
        GapRow {
            v_hat: self.v_hat,
            v_bar: self.v_bar,
            sigma: self.sigma,
            delta_pct: self.delta_percent,
            delta_alpha_pct: self.delta_alpha_percent,
            s2_vbar: self.s2_vbar,
            s2_vhat: self.s2_vhat,
            alpha: self.alpha,
            m: self.m,
            n: self.n,
            n_prime: self.n_prime,
            best_x: self.best_x.to_string(),
        }
    }
}

/// Standard-normal quantile at `alpha`.
pub fn z_score(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(standard_normal_quantile(alpha))
}

/// Solves `m` replications of size `n`; replication `k` (1-based) uses
/// scenario seed `base_seed + k` and the instance seed of `params`.
pub fn replicate_solve(
    params: &AppParams,
    n: usize,
    m: usize,
    base_seed: u64,
    cfg: &SolveConfig,
) -> Result<Vec<Replication>> {
    if m < 2 {
        return Err(Error::InvalidParams("variance estimation needs at least two replications".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParams("replications need at least one scenario".into()));
    }
    (1..=m)
        .into_par_iter()
        .map(|k| {
            let mut p = params.clone();
            let seed = base_seed.wrapping_add(k as u64);
            p.set_n_scenarios(n);
            p.set_scenario_seed(seed);
            let inst = p.generate()?;
            let sol = solve(&inst, cfg)?;
            log::info!("replication {k}/{m}: v = {:.6} x = {}", sol.objective, sol.x);
            Ok(Replication { index: k, scenario_seed: seed, n_scenarios: n, objective: sol.objective, x: sol.x })
        })
        .collect()
}

/// Pure arithmetic of the report from its four ingredients.
pub fn gap_from_estimates(v_bar: f64, s2_vbar: f64, v_hat: f64, s2_vhat: f64, alpha: f64) -> Result<(f64, f64, f64)> {
    let z = z_score(alpha)?;
    if v_hat == 0.0 {
        return Err(Error::Numerical("lower-bound estimate is zero".into()));
    }
    let sigma = (s2_vbar + s2_vhat).max(0.0).sqrt();
    let delta = (v_bar - v_hat) / v_hat * 100.0;
    Ok((sigma, delta, delta + z * sigma / v_hat * 100.0))
}

/// Mean and estimator variance `Σ(v − v̄)² / (M(M − 1))`.
pub fn replication_moments(values: &[f64]) -> Result<(f64, f64)> {
    let m = values.len();
    if m < 2 {
        return Err(Error::InvalidParams("variance estimation needs at least two replications".into()));
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((mean, ss / (m as f64 * (m as f64 - 1.0))))
}

/// Evaluates every distinct replication solution on `n_prime` fresh
/// scenarios drawn from `seed` and reports the gap against the best.
pub fn estimate_gap(
    reps: &[Replication],
    params: &AppParams,
    n_prime: usize,
    alpha: f64,
    seed: u64,
) -> Result<GapReport> {
    z_score(alpha)?;
    let values: Vec<f64> = reps.iter().map(|r| r.objective).collect();
    let (v_bar, s2_vbar) = replication_moments(&values)?;
    let process = params.process()?;
    let mut evaluated: BTreeMap<&BinaryDecision, (f64, f64)> = BTreeMap::new();
    for r in reps {
        if !evaluated.contains_key(&r.x) {
            evaluated.insert(&r.x, evaluate_process(process.as_ref(), &r.x, n_prime, seed)?);
        }
    }
    let mut best: Option<(&BinaryDecision, f64, f64)> = None;
    for r in reps {
        let (v, s2) = evaluated[&r.x];
        if best.map_or(true, |(_, bv, _)| v > bv) {
            best = Some((&r.x, v, s2));
        }
    }
    let (best_x, v_hat, s2_vhat) = best.expect("at least two replications");
    let (sigma, delta, delta_alpha) = gap_from_estimates(v_bar, s2_vbar, v_hat, s2_vhat, alpha)?;
    Ok(GapReport {
        v_bar,
        s2_vbar,
        v_hat,
        s2_vhat,
        sigma2: sigma * sigma,
        sigma,
        delta_percent: delta,
        delta_alpha_percent: delta_alpha,
        alpha,
        m: reps.len(),
        n: reps[0].n_scenarios,
        n_prime,
        best_x: best_x.clone(),
    })
}
