#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankplan::apps::{
    AppParams, CaopExponomialParams, CaopKappaParams, CaopMmnlParams, CaopProbitParams, FlopParams, MsmflpParams,
};
use rankplan::Scheme;

pub const FAMILIES: [&str; 6] = ["caop-exponomial", "caop-mmnl", "caop-probit", "caop-kappa", "flop", "msmflp"];

/// Small instance parameters: at most 12 options, 100 scenarios and τ ≤ 4.
pub fn small_params(family: &str, seed: u64) -> AppParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n_scenarios = rng.random_range(5..=100);
    let tau = rng.random_range(1..=4);
    let instance_seed = seed;
    let scenario_seed = seed.wrapping_mul(31).wrapping_add(7);
    let scheme = if rng.random_bool(0.5) { Scheme::Lhs } else { Scheme::Mcs };
    match family {
        "caop-exponomial" => {
            let n_products = rng.random_range(tau.max(3)..=11);
            AppParams::CaopExponomial(CaopExponomialParams {
                n_products,
                gamma: (tau as f64 + 1.0) / (n_products as f64 + 1.0),
                sigma_r: 0.2,
                sigma_u: 1.0,
                zeta: 1.0,
                instance_seed,
                scenario_seed,
                n_scenarios,
                scheme,
            })
        }
        "caop-mmnl" => AppParams::CaopMmnl(CaopMmnlParams {
            n_products: rng.random_range(tau + 1..=11),
            tau,
            r_bar: 10.0,
            d: 2.0,
            instance_seed,
            scenario_seed,
            n_scenarios,
            scheme,
        }),
        "caop-probit" => AppParams::CaopProbit(CaopProbitParams {
            n_products: rng.random_range(tau + 1..=11),
            tau,
            variance: 100.0,
            instance_seed,
            scenario_seed,
            n_scenarios,
            scheme,
        }),
        "caop-kappa" => AppParams::CaopKappa(CaopKappaParams {
            n_options: rng.random_range(tau + 2..=12),
            tau,
            kappa: [-1.0, 0.0, 1.0][rng.random_range(0..3)],
            instance_seed,
            scenario_seed,
            n_scenarios,
            scheme,
        }),
        "flop" => {
            let n_facilities = rng.random_range(2..=3);
            AppParams::Flop(FlopParams {
                n_facilities,
                n_levels: if n_facilities == 2 { 5 } else { 3 },
                tau: tau.min(n_facilities),
                budget: 10.0,
                instance_seed,
                scenario_seed,
                n_scenarios,
                scheme,
            })
        }
        "msmflp" => AppParams::Msmflp(MsmflpParams {
            n_facilities: rng.random_range(tau + 1..=12),
            tau,
            outside: 10.0,
            instance_seed,
            scenario_seed,
            n_scenarios,
            scheme,
        }),
        other => panic!("unknown family {other}"),
    }
}
