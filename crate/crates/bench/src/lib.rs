//! Benchmark fixtures.

use rankplan::apps::{AppParams, CaopExponomialParams, CaopProbitParams};
use rankplan::{Instance, Scheme};

pub fn probit(n_products: usize, n_scenarios: usize) -> (AppParams, Instance) {
    let params = AppParams::CaopProbit(CaopProbitParams {
        n_products,
        tau: 5,
        variance: 100.0,
        instance_seed: 1,
        scenario_seed: 2,
        n_scenarios,
        scheme: Scheme::Lhs,
    });
    let inst = params.generate().expect("valid probit params");
    (params, inst)
}

pub fn exponomial(n_products: usize, n_scenarios: usize) -> (AppParams, Instance) {
    let params = AppParams::CaopExponomial(CaopExponomialParams {
        n_products,
        gamma: 0.3,
        sigma_r: 0.2,
        sigma_u: 1.0,
        zeta: 1.0,
        instance_seed: 1,
        scenario_seed: 2,
        n_scenarios,
        scheme: Scheme::Lhs,
    });
    let inst = params.generate().expect("valid exponomial params");
    (params, inst)
}

/// A fractional point inside the cardinality polytope: every non-outside
/// option at `level`, the outside option fixed at one.
pub fn uniform_point(inst: &Instance, level: f64) -> Vec<f64> {
    let m = inst.space().n_options;
    let mut x = vec![level; m];
    x[0] = 1.0;
    x
}
