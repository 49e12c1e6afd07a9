//! Instance generators for the assortment, location–pricing and
//! maximum-capture location applications, plus rounding heuristics and
//! large-sample evaluation of a fixed decision.
//!
//! Each application is a [`ScenarioProcess`]: deterministic data drawn from
//! the instance seed, and a map from one row of probabilities to one
//! scenario's utilities and rewards. Generation and out-of-sample
//! evaluation share that map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AppTag, BinaryDecision, DecisionSpace, Instance, LinearRow, Provenance};
use crate::sampling::{probability_matrix, Distribution, Scheme, UniformStream};

/// Utility given to a product that is unavailable in a scenario.
pub const UNAVAILABLE_UTILITY: f64 = -1e9;

/// Smallest squared distance used in gravity utilities.
pub const MIN_SQUARED_DISTANCE: f64 = 1e-12;

/// Scenarios per chunk when streaming large evaluation samples.
const EVAL_CHUNK: usize = 8192;

/// Draws one scenario from probabilities in (0, 1).
pub trait ScenarioProcess: Sync {
    fn n_options(&self) -> usize;
    /// Probabilities consumed per scenario.
    fn dims(&self) -> usize;
    fn fill(&self, p: &[f64], u: &mut [f64], r: &mut [f64]);
    fn space(&self) -> DecisionSpace;
}

fn default_scheme() -> Scheme {
    Scheme::Lhs
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive, got {v}")))
    }
}

fn caop_space(n_options: usize, max_offered: f64) -> DecisionSpace {
    DecisionSpace {
        n_options,
        ineq: vec![LinearRow::new(vec![1.0; n_options], max_offered)],
        eq: vec![],
        fixed_ones: vec![0],
        app_tag: AppTag::Caop,
        groups: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaopExponomialParams {
    pub n_products: usize,
    pub gamma: f64,
    pub sigma_r: f64,
    pub sigma_u: f64,
    #[serde(default = "one")]
    pub zeta: f64,
    pub instance_seed: u64,
    pub scenario_seed: u64,
    pub n_scenarios: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaopMmnlParams {
    pub n_products: usize,
    pub tau: usize,
    pub r_bar: f64,
    pub d: f64,
    pub instance_seed: u64,
    pub scenario_seed: u64,
    pub n_scenarios: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaopProbitParams {
    pub n_products: usize,
    pub tau: usize,
    pub variance: f64,
    pub instance_seed: u64,
    pub scenario_seed: u64,
    pub n_scenarios: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaopKappaParams {
    /// Products plus the outside option.
    pub n_options: usize,
    pub tau: usize,
    pub kappa: f64,
    pub instance_seed: u64,
    pub scenario_seed: u64,
    pub n_scenarios: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopParams {
    pub n_facilities: usize,
    #[serde(default = "ten_levels")]
    pub n_levels: usize,
    pub tau: usize,
    #[serde(default = "ten")]
    pub budget: f64,
    pub instance_seed: u64,
    pub scenario_seed: u64,
    pub n_scenarios: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn ten_levels() -> usize {
    10
}

fn ten() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsmflpParams {
    pub n_facilities: usize,
    pub tau: usize,
    #[serde(default = "ten")]
    pub outside: f64,
    pub instance_seed: u64,
    pub scenario_seed: u64,
    pub n_scenarios: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

/// Parameters of any supported application, tagged by `"app"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "app", rename_all = "kebab-case")]
pub enum AppParams {
    CaopExponomial(CaopExponomialParams),
    CaopMmnl(CaopMmnlParams),
    CaopProbit(CaopProbitParams),
    CaopKappa(CaopKappaParams),
    Flop(FlopParams),
    Msmflp(MsmflpParams),
}

macro_rules! each_params {
    ($self:expr, $p:ident => $body:expr) => {
        match $self {
            AppParams::CaopExponomial($p) => $body,
            AppParams::CaopMmnl($p) => $body,
            AppParams::CaopProbit($p) => $body,
            AppParams::CaopKappa($p) => $body,
            AppParams::Flop($p) => $body,
            AppParams::Msmflp($p) => $body,
        }
    };
}

impl AppParams {
    pub fn name(&self) -> &'static str {
        match self {
            AppParams::CaopExponomial(_) => "caop-exponomial",
            AppParams::CaopMmnl(_) => "caop-mmnl",
            AppParams::CaopProbit(_) => "caop-probit",
            AppParams::CaopKappa(_) => "caop-kappa",
            AppParams::Flop(_) => "flop",
            AppParams::Msmflp(_) => "msmflp",
        }
    }

    pub fn app_tag(&self) -> AppTag {
        match self {
            AppParams::Flop(_) => AppTag::Flop,
            AppParams::Msmflp(_) => AppTag::Msmflp,
            _ => AppTag::Caop,
        }
    }

    pub fn instance_seed(&self) -> u64 {
        each_params!(self, p => p.instance_seed)
    }

    pub fn scenario_seed(&self) -> u64 {
        each_params!(self, p => p.scenario_seed)
    }

    pub fn n_scenarios(&self) -> usize {
        each_params!(self, p => p.n_scenarios)
    }

    pub fn scheme(&self) -> Scheme {
        each_params!(self, p => p.scheme)
    }

    pub fn set_scenario_seed(&mut self, seed: u64) {
        each_params!(self, p => p.scenario_seed = seed)
    }

    pub fn set_instance_seed(&mut self, seed: u64) {
        each_params!(self, p => p.instance_seed = seed)
    }

    pub fn set_n_scenarios(&mut self, n: usize) {
        each_params!(self, p => p.n_scenarios = n)
    }

    pub fn set_scheme(&mut self, scheme: Scheme) {
        each_params!(self, p => p.scheme = scheme)
    }

    /// Deterministic part of the application, drawn from the instance seed.
    pub fn process(&self) -> Result<Box<dyn ScenarioProcess>> {
        Ok(match self {
            AppParams::CaopExponomial(p) => Box::new(Exponomial::new(p)?),
            AppParams::CaopMmnl(p) => Box::new(Mmnl::new(p)?),
            AppParams::CaopProbit(p) => Box::new(Probit::new(p)?),
            AppParams::CaopKappa(p) => Box::new(Exponomial::kappa(p)?),
            AppParams::Flop(p) => Box::new(Flop::new(p)?),
            AppParams::Msmflp(p) => Box::new(Msmflp::new(p)?),
        })
    }

    pub fn generate(&self) -> Result<Instance> {
        if self.n_scenarios() == 0 {
            return Err(Error::InvalidParams("n_scenarios must be at least 1".into()));
        }
        let process = self.process()?;
        let provenance = Provenance {
            generator: self.name().to_string(),
            params: serde_json::to_value(self)?,
            instance_seed: Some(self.instance_seed()),
            scenario_seed: Some(self.scenario_seed()),
            scheme: Some(self.scheme()),
            jittered_rows: vec![],
        };
        generate_with(process.as_ref(), self.n_scenarios(), self.scheme(), self.scenario_seed(), provenance)
    }
}

/// Samples `n` scenarios of `process` and builds a tie-repaired instance.
pub fn generate_with(
    process: &dyn ScenarioProcess,
    n: usize,
    scheme: Scheme,
    seed: u64,
    provenance: Provenance,
) -> Result<Instance> {
    let m = process.n_options();
    let d = process.dims();
    let probs = probability_matrix(scheme, n, d, seed);
    let mut u = vec![0.0; n * m];
    let mut r = vec![0.0; n * m];
    for i in 0..n {
        process.fill(&probs[i * d..(i + 1) * d], &mut u[i * m..(i + 1) * m], &mut r[i * m..(i + 1) * m]);
    }
    Instance::with_tie_repair(process.space(), n, u, r, provenance)
}

pub fn gen_caop_exponomial(p: &CaopExponomialParams) -> Result<Instance> {
    AppParams::CaopExponomial(p.clone()).generate()
}

pub fn gen_caop_mmnl(p: &CaopMmnlParams) -> Result<Instance> {
    AppParams::CaopMmnl(p.clone()).generate()
}

pub fn gen_caop_probit(p: &CaopProbitParams) -> Result<Instance> {
    AppParams::CaopProbit(p.clone()).generate()
}

pub fn gen_caop_kappa(p: &CaopKappaParams) -> Result<Instance> {
    AppParams::CaopKappa(p.clone()).generate()
}

pub fn gen_flop(p: &FlopParams) -> Result<Instance> {
    AppParams::Flop(p.clone()).generate()
}

pub fn gen_msmflp(p: &MsmflpParams) -> Result<Instance> {
    AppParams::Msmflp(p.clone()).generate()
}

/// Exponential-noise assortment model: `u = V − ξ`, `ξ ~ Exp(ζ)`.
pub struct Exponomial {
    v: Vec<f64>,
    r: Vec<f64>,
    noise: Distribution,
    max_offered: f64,
}

impl Exponomial {
    pub fn new(p: &CaopExponomialParams) -> Result<Self> {
        if p.n_products == 0 {
            return Err(Error::InvalidParams("need at least one product".into()));
        }
        if !(p.gamma > 0.0 && p.gamma <= 1.0) {
            return Err(Error::InvalidParams(format!("gamma must lie in (0, 1], got {}", p.gamma)));
        }
        positive("sigma_r", p.sigma_r)?;
        positive("sigma_u", p.sigma_u)?;
        positive("zeta", p.zeta)?;
        let mut s = UniformStream::new(p.instance_seed);
        let reward = Distribution::Lognormal { location: 0.0, scale: p.sigma_r };
        let det = Distribution::Normal { mean: 1.0, variance: p.sigma_u };
        let mut r = vec![0.0];
        r.extend((0..p.n_products).map(|_| reward.quantile(s.next_open01())));
        let mut products: Vec<f64> = (0..p.n_products).map(|_| det.quantile(s.next_open01())).collect();
        products.sort_by(|a, b| b.total_cmp(a));
        let mut v = vec![0.0];
        v.extend(products);
        let n_options = p.n_products + 1;
        Ok(Self { v, r, noise: Distribution::Exponential { rate: p.zeta }, max_offered: p.gamma * n_options as f64 })
    }

    /// Rewards lognormal(0, 0.2), `V = κR + b` with `b ~ N(1, 1)`.
    pub fn kappa(p: &CaopKappaParams) -> Result<Self> {
        if p.n_options < 2 {
            return Err(Error::InvalidParams("need at least one product besides the outside option".into()));
        }
        if !p.kappa.is_finite() {
            return Err(Error::InvalidParams("kappa must be finite".into()));
        }
        if p.tau == 0 || p.tau >= p.n_options {
            return Err(Error::InvalidParams(format!("tau must lie in 1..{}", p.n_options)));
        }
        let mut s = UniformStream::new(p.instance_seed);
        let reward = Distribution::Lognormal { location: 0.0, scale: 0.2 };
        let shift = Distribution::Normal { mean: 1.0, variance: 1.0 };
        let mut r = vec![0.0];
        let mut v = vec![0.0];
        for _ in 1..p.n_options {
            let ra = reward.quantile(s.next_open01());
            r.push(ra);
            v.push(p.kappa * ra + shift.quantile(s.next_open01()));
        }
        Ok(Self { v, r, noise: Distribution::Exponential { rate: 1.0 }, max_offered: (p.tau + 1) as f64 })
    }

    pub fn deterministic_utilities(&self) -> &[f64] {
        &self.v
    }

    pub fn rewards(&self) -> &[f64] {
        &self.r
    }
}

impl ScenarioProcess for Exponomial {
    fn n_options(&self) -> usize {
        self.v.len()
    }

    fn dims(&self) -> usize {
        self.v.len()
    }

    fn fill(&self, p: &[f64], u: &mut [f64], r: &mut [f64]) {
        for j in 0..self.v.len() {
            u[j] = self.v[j] - self.noise.quantile(p[j]);
            r[j] = self.r[j];
        }
    }

    fn space(&self) -> DecisionSpace {
        caop_space(self.v.len(), self.max_offered)
    }
}

/// Mixed logit with latent availability and taste shocks per product.
pub struct Mmnl {
    ln_alpha: Vec<f64>,
    r: Vec<f64>,
    theta1: f64,
    theta2: f64,
    tau: usize,
}

/// `(ϑ₁, ϑ₂)` with `ϑ₁ + ϑ₂²/2 = ln 10` and `√(exp(ϑ₂²/2) − 1) = D`.
pub fn mmnl_thetas(d: f64) -> (f64, f64) {
    let theta2 = (2.0 * (1.0 + d * d).ln()).sqrt();
    (10f64.ln() - theta2 * theta2 / 2.0, theta2)
}

impl Mmnl {
    pub fn new(p: &CaopMmnlParams) -> Result<Self> {
        if p.n_products == 0 {
            return Err(Error::InvalidParams("need at least one product".into()));
        }
        if !(p.r_bar >= 1.0) {
            return Err(Error::InvalidParams(format!("r_bar must be at least 1, got {}", p.r_bar)));
        }
        positive("d", p.d)?;
        if p.tau == 0 || p.tau > p.n_products {
            return Err(Error::InvalidParams(format!("tau must lie in 1..={}", p.n_products)));
        }
        let mut s = UniformStream::new(p.instance_seed);
        let std = Distribution::Normal { mean: 0.0, variance: 1.0 };
        let psi: Vec<f64> = (0..p.n_products).map(|_| std.quantile(s.next_open01()).abs()).collect();
        let total: f64 = psi.iter().sum();
        let ln_alpha = psi.iter().map(|v| (v / total).ln()).collect();
        let mut r = vec![0.0];
        if p.r_bar > 1.0 {
            let reward = Distribution::Uniform { lo: 1.0, hi: p.r_bar };
            r.extend((0..p.n_products).map(|_| reward.quantile(s.next_open01())));
        } else {
            r.extend(std::iter::repeat_n(1.0, p.n_products));
        }
        let (theta1, theta2) = mmnl_thetas(p.d);
        Ok(Self { ln_alpha, r, theta1, theta2, tau: p.tau })
    }

    pub fn rewards(&self) -> &[f64] {
        &self.r
    }

    fn n_products(&self) -> usize {
        self.ln_alpha.len()
    }

    /// Deterministic utility of product `a` given availability and taste
    /// probabilities.
    #[inline]
    fn segment_utility(&self, a: usize, p_avail: f64, p_taste: f64) -> f64 {
        if p_avail >= 0.5 {
            self.ln_alpha[a] + self.theta1 + self.theta2 * crate::sampling::standard_normal_quantile(p_taste)
        } else {
            UNAVAILABLE_UTILITY
        }
    }

    /// `count` segments of deterministic product utilities (no Gumbel noise).
    pub fn segments(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let k = self.n_products();
        let probs = probability_matrix(Scheme::Mcs, count, 2 * k, seed);
        (0..count)
            .map(|i| {
                let row = &probs[i * 2 * k..(i + 1) * 2 * k];
                (0..k).map(|a| self.segment_utility(a, row[a], row[k + a])).collect()
            })
            .collect()
    }
}

impl ScenarioProcess for Mmnl {
    fn n_options(&self) -> usize {
        self.n_products() + 1
    }

    fn dims(&self) -> usize {
        2 * self.n_products() + self.n_products() + 1
    }

    fn fill(&self, p: &[f64], u: &mut [f64], r: &mut [f64]) {
        let k = self.n_products();
        let gumbel = |q: f64| -(-q.ln()).ln();
        u[0] = gumbel(p[2 * k]);
        r[0] = 0.0;
        for a in 0..k {
            u[a + 1] = self.segment_utility(a, p[a], p[k + a]) + gumbel(p[2 * k + 1 + a]);
            r[a + 1] = self.r[a + 1];
        }
    }

    fn space(&self) -> DecisionSpace {
        caop_space(self.n_products() + 1, (self.tau + 1) as f64)
    }
}

/// Closed-form expected reward of `x` under logit noise, averaged over
/// segments of product utilities (`segments[s][a]` for product `a`, i.e.
/// option `a + 1`). `rewards` is indexed by option.
pub fn mmnl_closed_objective(x: &BinaryDecision, segments: &[Vec<f64>], rewards: &[f64]) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::InvalidParams("need at least one segment".into()));
    }
    if rewards.len() != x.len() {
        return Err(Error::InvalidParams("reward vector does not match the decision".into()));
    }
    let mut total = 0.0;
    for seg in segments {
        if seg.len() + 1 != x.len() {
            return Err(Error::InvalidParams("segment length does not match the decision".into()));
        }
        let shift = x
            .offered()
            .filter(|&j| j > 0)
            .map(|j| seg[j - 1])
            .fold(0.0f64, f64::max);
        let mut num = 0.0;
        let mut den = (-shift).exp();
        for j in x.offered().filter(|&j| j > 0) {
            let w = (seg[j - 1] - shift).exp();
            num += rewards[j] * w;
            den += w;
        }
        total += num / den;
    }
    Ok(total / segments.len() as f64)
}

/// Normal-noise assortment model.
pub struct Probit {
    v: Vec<f64>,
    r: Vec<f64>,
    noise: Distribution,
    tau: usize,
}

impl Probit {
    pub fn new(p: &CaopProbitParams) -> Result<Self> {
        if p.n_products == 0 {
            return Err(Error::InvalidParams("need at least one product".into()));
        }
        positive("variance", p.variance)?;
        if p.tau == 0 || p.tau > p.n_products {
            return Err(Error::InvalidParams(format!("tau must lie in 1..={}", p.n_products)));
        }
        let mut s = UniformStream::new(p.instance_seed);
        let unif = Distribution::Uniform { lo: 0.0, hi: 100.0 };
        let mut v = vec![50.0];
        v.extend((0..p.n_products).map(|_| unif.quantile(s.next_open01())));
        let mut r = vec![0.0];
        r.extend((0..p.n_products).map(|_| unif.quantile(s.next_open01())));
        Ok(Self { v, r, noise: Distribution::Normal { mean: 0.0, variance: p.variance }, tau: p.tau })
    }

    pub fn deterministic_utilities(&self) -> &[f64] {
        &self.v
    }
}

impl ScenarioProcess for Probit {
    fn n_options(&self) -> usize {
        self.v.len()
    }

    fn dims(&self) -> usize {
        self.v.len()
    }

    fn fill(&self, p: &[f64], u: &mut [f64], r: &mut [f64]) {
        for j in 0..self.v.len() {
            u[j] = self.v[j] + self.noise.quantile(p[j]);
            r[j] = self.r[j];
        }
    }

    fn space(&self) -> DecisionSpace {
        caop_space(self.v.len(), (self.tau + 1) as f64)
    }
}

/// Joint facility location and pricing on a 20×20 square.
pub struct Flop {
    facilities: Vec<(f64, f64)>,
    n_levels: usize,
    tau: usize,
    budget: f64,
}

impl Flop {
    pub fn new(p: &FlopParams) -> Result<Self> {
        if p.n_facilities == 0 || p.n_levels == 0 {
            return Err(Error::InvalidParams("need facilities and price levels".into()));
        }
        if p.tau == 0 || p.tau > p.n_facilities {
            return Err(Error::InvalidParams(format!("tau must lie in 1..={}", p.n_facilities)));
        }
        if !p.budget.is_finite() {
            return Err(Error::InvalidParams("budget must be finite".into()));
        }
        let mut s = UniformStream::new(p.instance_seed);
        let facilities = (0..p.n_facilities).map(|_| (20.0 * s.next_open01(), 20.0 * s.next_open01())).collect();
        Ok(Self { facilities, n_levels: p.n_levels, tau: p.tau, budget: p.budget })
    }

    /// Flat option index of facility `a` at price level `l` (both 0-based).
    pub fn option(&self, a: usize, l: usize) -> usize {
        1 + a * self.n_levels + l
    }

    pub fn facilities(&self) -> &[(f64, f64)] {
        &self.facilities
    }
}

impl ScenarioProcess for Flop {
    fn n_options(&self) -> usize {
        1 + self.facilities.len() * self.n_levels
    }

    fn dims(&self) -> usize {
        2
    }

    fn fill(&self, p: &[f64], u: &mut [f64], r: &mut [f64]) {
        let (cx, cy) = (20.0 * p[0], 20.0 * p[1]);
        u[0] = -self.budget;
        r[0] = 0.0;
        for (a, &(fx, fy)) in self.facilities.iter().enumerate() {
            let d = ((cx - fx).powi(2) + (cy - fy).powi(2)).sqrt();
            for l in 0..self.n_levels {
                let price = (l + 1) as f64;
                let j = self.option(a, l);
                u[j] = -(d + price);
                r[j] = price;
            }
        }
    }

    fn space(&self) -> DecisionSpace {
        let n = self.n_options();
        let groups: Vec<Vec<usize>> =
            (0..self.facilities.len()).map(|a| (0..self.n_levels).map(|l| self.option(a, l)).collect()).collect();
        let ineq = groups
            .iter()
            .map(|g| {
                let mut c = vec![0.0; n];
                for &j in g {
                    c[j] = 1.0;
                }
                LinearRow::new(c, 1.0)
            })
            .collect();
        DecisionSpace {
            n_options: n,
            ineq,
            eq: vec![LinearRow::new(vec![1.0; n], (self.tau + 1) as f64)],
            fixed_ones: vec![0],
            app_tag: AppTag::Flop,
            groups: Some(groups),
        }
    }
}

/// Multi-scenario maximum-capture location with a gravity utility.
pub struct Msmflp {
    facilities: Vec<(f64, f64)>,
    attractiveness: Vec<f64>,
    tau: usize,
    outside: f64,
}

impl Msmflp {
    pub fn new(p: &MsmflpParams) -> Result<Self> {
        if p.n_facilities == 0 {
            return Err(Error::InvalidParams("need at least one facility".into()));
        }
        if p.tau == 0 || p.tau > p.n_facilities {
            return Err(Error::InvalidParams(format!("tau must lie in 1..={}", p.n_facilities)));
        }
        if !(p.outside.is_finite() && p.outside >= 0.0) {
            return Err(Error::InvalidParams(format!("outside utility must be >= 0, got {}", p.outside)));
        }
        let mut s = UniformStream::new(p.instance_seed);
        let facilities = (0..p.n_facilities).map(|_| (20.0 * s.next_open01(), 20.0 * s.next_open01())).collect();
        let att = Distribution::Uniform { lo: 1.0, hi: 20.0 };
        let attractiveness = (0..p.n_facilities).map(|_| att.quantile(s.next_open01())).collect();
        Ok(Self { facilities, attractiveness, tau: p.tau, outside: p.outside })
    }
}

/// Captured share `u / (u + O)`.
pub fn capture_reward(u: f64, outside: f64) -> f64 {
    u / (u + outside)
}

impl ScenarioProcess for Msmflp {
    fn n_options(&self) -> usize {
        self.facilities.len()
    }

    fn dims(&self) -> usize {
        2
    }

    fn fill(&self, p: &[f64], u: &mut [f64], r: &mut [f64]) {
        let loc = Distribution::Normal { mean: 10.0, variance: 100.0 / 3.0 };
        let (cx, cy) = (loc.quantile(p[0]), loc.quantile(p[1]));
        for (j, &(fx, fy)) in self.facilities.iter().enumerate() {
            let d2 = ((cx - fx).powi(2) + (cy - fy).powi(2)).max(MIN_SQUARED_DISTANCE);
            u[j] = self.attractiveness[j] / d2;
            r[j] = capture_reward(u[j], self.outside);
        }
    }

    fn space(&self) -> DecisionSpace {
        let n = self.facilities.len();
        DecisionSpace {
            n_options: n,
            ineq: vec![],
            eq: vec![LinearRow::new(vec![1.0; n], self.tau as f64)],
            fixed_ones: vec![],
            app_tag: AppTag::Msmflp,
            groups: None,
        }
    }
}

/// Indices of the `k` largest entries of `idx` by `x`, ties to lower index.
fn top_k(x: &[f64], mut idx: Vec<usize>, k: usize) -> Vec<usize> {
    idx.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Number of ones the cardinality row allows beyond the fixed ones, and
/// whether it must be met exactly.
fn free_slots(space: &DecisionSpace) -> Result<(usize, bool)> {
    let (rhs, is_eq) = space
        .cardinality()
        .ok_or_else(|| Error::InvalidInstance("decision space has no cardinality row".into()))?;
    let total = (rhs + 1e-9).floor() as usize;
    Ok((total.saturating_sub(space.fixed_ones.len()), is_eq))
}

/// Rounds a fractional point to a feasible decision with the
/// application's greedy rule.
pub fn round_to_feasible(app_tag: AppTag, x_frac: &[f64], space: &DecisionSpace) -> Result<BinaryDecision> {
    const ZERO: f64 = 1e-9;
    if x_frac.len() != space.n_options {
        return Err(Error::InvalidInstance("fractional point has the wrong length".into()));
    }
    let mut x = BinaryDecision::zeros(space.n_options);
    for &j in &space.fixed_ones {
        x.set(j, true);
    }
    let (slots, exact) = free_slots(space)?;
    match app_tag {
        AppTag::Caop | AppTag::Msmflp => {
            let cands: Vec<usize> = (0..space.n_options)
                .filter(|&j| !space.is_fixed(j) && (exact || x_frac[j] > ZERO))
                .collect();
            for j in top_k(x_frac, cands, slots) {
                x.set(j, true);
            }
        }
        AppTag::Flop => {
            let groups = space
                .groups
                .as_ref()
                .ok_or_else(|| Error::InvalidInstance("location-pricing space without groups".into()))?;
            let mut t = Vec::with_capacity(groups.len());
            let mut k = Vec::with_capacity(groups.len());
            for g in groups {
                let best = *top_k(x_frac, g.clone(), 1).first().ok_or_else(|| Error::InvalidInstance("empty group".into()))?;
                t.push(x_frac[best]);
                k.push(best);
            }
            let cands: Vec<usize> = (0..groups.len()).filter(|&a| exact || t[a] > ZERO).collect();
            for a in top_k(&t, cands, slots) {
                x.set(k[a], true);
            }
        }
        AppTag::Generic => return Err(Error::UnknownApp("generic spaces have no rounding rule".into())),
    }
    if !space.is_feasible(&x) {
        return Err(Error::InfeasibleDecision(format!("rounded decision {x} violates the space")));
    }
    Ok(x)
}

/// Utility-maximizing offered option's reward for one scenario row.
#[inline]
pub fn scenario_reward(x: &BinaryDecision, u: &[f64], r: &[f64]) -> Option<f64> {
    let mut best: Option<usize> = None;
    for j in x.offered() {
        best = match best {
            Some(b) if u[b] > u[j] || (u[b] == u[j] && r[b] >= r[j]) => Some(b),
            _ => Some(j),
        };
    }
    best.map(|j| r[j])
}

/// Running mean and sum of squared deviations, merged in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let delta = v - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Moments { n, mean: self.mean + delta * o.n / n, m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n }
    }
}

/// Mean reward of `x` over `n_prime` fresh Monte Carlo scenarios and the
/// variance of that mean, `Σ(Q − v̂)² / (n′(n′ − 1))`. Chunks draw from
/// substreams of `seed`, so the result does not depend on thread count.
pub fn evaluate_true(params: &AppParams, x: &BinaryDecision, n_prime: usize, seed: u64) -> Result<(f64, f64)> {
    let process = params.process()?;
    evaluate_process(process.as_ref(), x, n_prime, seed)
}

pub fn evaluate_process(process: &dyn ScenarioProcess, x: &BinaryDecision, n_prime: usize, seed: u64) -> Result<(f64, f64)> {
    if n_prime < 2 {
        return Err(Error::InvalidParams("evaluation needs at least two scenarios".into()));
    }
    let space = process.space();
    if x.len() != space.n_options || !space.is_feasible(x) {
        return Err(Error::InfeasibleDecision(format!("{x} is not feasible for this application")));
    }
    let m = process.n_options();
    let d = process.dims();
    let chunks = n_prime.div_ceil(EVAL_CHUNK);
    let parts: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = EVAL_CHUNK.min(n_prime - c * EVAL_CHUNK);
            let mut stream = UniformStream::substream(seed, c as u64);
            let mut p = vec![0.0; d];
            let mut u = vec![0.0; m];
            let mut r = vec![0.0; m];
            let mut mom = Moments::default();
            for _ in 0..len {
                for v in p.iter_mut() {
                    *v = stream.next_open01();
                }
                process.fill(&p, &mut u, &mut r);
                let q = scenario_reward(x, &u, &r).ok_or(Error::EmptyOfferSet { scenario: 0 })?;
                mom.push(q);
            }
            Ok(mom)
        })
        .collect();
    let mut total = Moments::default();
    for part in parts {
        total = total.merge(part?);
    }
    let n = total.n;
    Ok((total.mean, total.m2 / (n * (n - 1.0))))
}
