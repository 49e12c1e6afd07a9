mod common;

use common::{small_params, FAMILIES};
use rankplan::engine::{solve_extensive, solve_sbbd, SolveConfig};
use rankplan::{enumerate_optimal, Error, Method, SolveStatus};

#[test]
fn methods_agree_on_small_instances() {
    for family in FAMILIES {
        for seed in 0..8 {
            let inst = small_params(family, seed).generate().unwrap();
            let (_, v_enum) = enumerate_optimal(&inst).unwrap();
            let cfg = SolveConfig::default();
            let s = solve_sbbd(&inst, &cfg).unwrap();
            let e = solve_extensive(&inst, &SolveConfig::with_method(Method::Extensive)).unwrap();
            assert!((s.objective - v_enum).abs() <= 1e-6, "{family} seed {seed}: sbbd {} enum {v_enum}", s.objective);
            assert!((e.objective - v_enum).abs() <= 1e-6, "{family} seed {seed}: ext {} enum {v_enum}", e.objective);
            assert_eq!(s.status, SolveStatus::Optimal);
            assert_eq!(e.stats.y_integrality_violations, 0);
            assert!(s.stats.root_bound >= v_enum - 1e-9);
        }
    }
}

#[test]
fn extensive_respects_size_cap() {
    let inst = small_params("msmflp", 3).generate().unwrap();
    let cfg = SolveConfig { extensive_cap: 10, ..SolveConfig::with_method(Method::Extensive) };
    assert!(matches!(solve_extensive(&inst, &cfg), Err(Error::SizeCap { .. })));
}

#[test]
fn reruns_are_identical() {
    let inst = small_params("caop-probit", 11).generate().unwrap();
    let a = solve_sbbd(&inst, &SolveConfig::default()).unwrap();
    let b = solve_sbbd(&inst, &SolveConfig::default()).unwrap();
    assert_eq!(a.fingerprint(), b.fingerprint());
}
