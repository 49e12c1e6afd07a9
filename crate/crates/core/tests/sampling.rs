use proptest::prelude::*;
use rankplan::sampling::{inverse_cdf, sample, standard_normal_quantile, Distribution, Scheme};
use statrs::distribution::{ContinuousCDF, Exp, Gumbel, LogNormal, Normal};

#[test]
fn normal_quantile_matches_statrs() {
    let n = Normal::new(0.0, 1.0).unwrap();
    for k in 1..2000 {
        let p = k as f64 / 2000.0;
        let ours = standard_normal_quantile(p);
        let theirs = n.inverse_cdf(p);
        assert!((ours - theirs).abs() < 1e-9, "p={p}: {ours} vs {theirs}");
    }
    for &p in &[1e-12, 1e-8, 1e-5, 1.0 - 1e-5, 1.0 - 1e-8] {
        let ours = standard_normal_quantile(p);
        let back = n.cdf(ours);
        assert!(((back - p) / p.min(1.0 - p)).abs() < 1e-6, "p={p}");
    }
}

#[test]
fn other_quantiles_match_statrs() {
    let cases: Vec<(Distribution, Box<dyn Fn(f64) -> f64>)> = vec![
        (Distribution::Normal { mean: 1.0, variance: 4.0 }, {
            let d = Normal::new(1.0, 2.0).unwrap();
            Box::new(move |p| d.inverse_cdf(p))
        }),
        (Distribution::Lognormal { location: 0.0, scale: 0.2 }, {
            let d = LogNormal::new(0.0, 0.2).unwrap();
            Box::new(move |p| d.inverse_cdf(p))
        }),
        (Distribution::Exponential { rate: 2.0 }, {
            let d = Exp::new(2.0).unwrap();
            Box::new(move |p| d.inverse_cdf(p))
        }),
        (Distribution::Gumbel { location: 0.0, scale: 1.0 }, {
            let d = Gumbel::new(0.0, 1.0).unwrap();
            Box::new(move |p| d.inverse_cdf(p))
        }),
    ];
    for (spec, oracle) in &cases {
        for k in 1..100 {
            let p = k as f64 / 100.0;
            let ours = inverse_cdf(spec, p).unwrap();
            let theirs = oracle(p);
            assert!((ours - theirs).abs() <= 1e-8 * theirs.abs().max(1.0), "{spec:?} p={p}: {ours} vs {theirs}");
        }
    }
}

proptest! {
    #[test]
    fn lhs_hits_every_stratum(n in 1usize..60, d in 1usize..4, seed in any::<u64>()) {
        let m = sample(&Distribution::Uniform { lo: 0.0, hi: 1.0 }, Scheme::Lhs, n, d, seed).unwrap();
        for c in 0..d {
            let mut cells: Vec<usize> = m.column(c).map(|v| (v * n as f64).floor() as usize).collect();
            cells.sort_unstable();
            prop_assert_eq!(cells, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn quantile_is_monotone(a in 0.0001f64..0.9999, b in 0.0001f64..0.9999) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(standard_normal_quantile(lo) <= standard_normal_quantile(hi));
    }
}
