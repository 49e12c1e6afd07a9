use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankplan::simplex::{solve, verify_kkt, LpProblem, LpRow, LpStatus, RowKind, Simplex};

const INF: f64 = f64::INFINITY;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn textbook_maximization() {
    let mut p = LpProblem::new();
    let x = p.add_var(3.0, 0.0, INF);
    let y = p.add_var(5.0, 0.0, INF);
    p.add_row(vec![(x, 1.0)], RowKind::Le, 4.0);
    p.add_row(vec![(y, 2.0)], RowKind::Le, 12.0);
    p.add_row(vec![(x, 3.0), (y, 2.0)], RowKind::Le, 18.0);
    let s = solve(&p).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!(close(s.objective, 36.0, 1e-12));
    assert!(close(s.x[0], 2.0, 1e-12) && close(s.x[1], 6.0, 1e-12));
    assert!(close(s.row_duals[0], 0.0, 1e-12));
    assert!(close(s.row_duals[1], 1.5, 1e-12));
    assert!(close(s.row_duals[2], 1.0, 1e-12));
    assert!(verify_kkt(&p, &s).is_ok(1e-9));
}

#[test]
fn equality_and_ge_rows_with_free_variable() {
    // max -x - 2y + z  s.t. x + y = 4, x - z >= 1, z free, z <= 10 via row
    let mut p = LpProblem::new();
    let x = p.add_var(-1.0, 0.0, INF);
    let y = p.add_var(-2.0, 0.0, INF);
    let z = p.add_var(1.0, -INF, INF);
    p.add_row(vec![(x, 1.0), (y, 1.0)], RowKind::Eq, 4.0);
    p.add_row(vec![(x, 1.0), (z, -1.0)], RowKind::Ge, 1.0);
    let s = solve(&p).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    // x = 4, y = 0, z = 3 gives -4 + 3 = -1
    assert!(close(s.objective, -1.0, 1e-12), "{}", s.objective);
    assert!(close(s.x[2], 3.0, 1e-12));
    assert!(verify_kkt(&p, &s).is_ok(1e-9));
}

#[test]
fn detects_infeasible_and_unbounded() {
    let mut p = LpProblem::new();
    let x = p.add_var(1.0, 0.0, 1.0);
    let y = p.add_var(1.0, 0.0, 1.0);
    p.add_row(vec![(x, 1.0), (y, 1.0)], RowKind::Ge, 3.0);
    assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);

    let mut q = LpProblem::new();
    let x = q.add_var(1.0, 0.0, INF);
    let y = q.add_var(0.0, 0.0, INF);
    q.add_row(vec![(x, 1.0), (y, -1.0)], RowKind::Le, 1.0);
    assert_eq!(solve(&q).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn degenerate_assignment() {
    // 6x6 assignment LP with many equal weights; optimum is integral
    let n = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut p = LpProblem::new();
    let mut w = vec![vec![0.0; n]; n];
    for row in w.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.random_range(0..3) as f64;
        }
    }
    for i in 0..n {
        for j in 0..n {
            p.add_var(w[i][j], 0.0, INF);
        }
    }
    for i in 0..n {
        p.add_row((0..n).map(|j| (i * n + j, 1.0)).collect(), RowKind::Eq, 1.0);
        p.add_row((0..n).map(|j| (j * n + i, 1.0)).collect(), RowKind::Eq, 1.0);
    }
    let s = solve(&p).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!(verify_kkt(&p, &s).is_ok(1e-9));
    // brute force over permutations
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::NEG_INFINITY;
    permute(&mut perm, 0, &mut |pm| {
        let v: f64 = (0..n).map(|i| w[i][pm[i]]).sum();
        best = best.max(v);
    });
    assert!(close(s.objective, best, 1e-12));
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

fn random_feasible_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LpProblem {
    let mut p = LpProblem::new();
    let mut x0 = Vec::new();
    for _ in 0..n {
        let lo = rng.random_range(-3.0..0.0);
        let hi = lo + rng.random_range(0.0..5.0);
        p.add_var(rng.random_range(-2.0..2.0), lo, hi);
        x0.push(rng.random_range(lo..=hi));
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                coeffs.push((j, rng.random_range(-3.0..3.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let kind = match rng.random_range(0..4) {
            0 => RowKind::Eq,
            1 => RowKind::Ge,
            _ => RowKind::Le,
        };
        let rhs = match kind {
            RowKind::Eq => act,
            RowKind::Le => act + rng.random_range(0.0..2.0),
            RowKind::Ge => act - rng.random_range(0.0..2.0),
        };
        p.add_row(coeffs, kind, rhs);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_boxed_lps_satisfy_kkt(seed in any::<u64>(), n in 1usize..10, m in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_feasible_lp(&mut rng, n, m);
        let s = solve(&p).unwrap();
        prop_assert_eq!(s.status, LpStatus::Optimal);
        let k = verify_kkt(&p, &s);
        prop_assert!(k.is_ok(1e-7), "{:?}", k);
    }

    #[test]
    fn warm_start_matches_cold_solve(seed in any::<u64>(), n in 2usize..8, m in 1usize..8, extra in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let full = random_feasible_lp(&mut rng, n, m + extra);
        let mut base = full.clone();
        base.rows.truncate(m);
        let mut sx = Simplex::new(&base).unwrap();
        prop_assert_eq!(sx.solve().unwrap().status, LpStatus::Optimal);
        for row in &full.rows[m..] {
            sx.add_row(row).unwrap();
        }
        let warm = sx.solve().unwrap();
        let cold = solve(&full).unwrap();
        prop_assert_eq!(warm.status, LpStatus::Optimal);
        prop_assert!(close(warm.objective, cold.objective, 1e-8), "{} vs {}", warm.objective, cold.objective);

        // tighten a bound and compare again
        let j = rng.random_range(0..n);
        let (lo, hi) = (full.lower[j], full.upper[j]);
        let mid = 0.5 * (lo + hi);
        sx.set_bounds(j, lo, mid).unwrap();
        let mut tightened = full.clone();
        tightened.upper[j] = mid;
        let warm = sx.solve().unwrap();
        let cold = solve(&tightened).unwrap();
        prop_assert_eq!(warm.status, cold.status);
        if cold.status == LpStatus::Optimal {
            prop_assert!(close(warm.objective, cold.objective, 1e-8));
            prop_assert!(verify_kkt(&tightened, &warm).is_ok(1e-7));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn removing_slack_rows_keeps_the_optimum(seed in any::<u64>(), n in 2usize..8, m in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let full = random_feasible_lp(&mut rng, n, m);
        let mut sx = Simplex::new(&full).unwrap();
        let before = sx.solve().unwrap();
        prop_assert_eq!(before.status, LpStatus::Optimal);
        let map = sx.remove_rows(&(0..m).collect::<Vec<_>>());
        prop_assert_eq!(map.len(), m);
        let kept: Vec<usize> = (0..m).filter(|&i| map[i].is_some()).collect();
        prop_assert_eq!(sx.n_rows(), kept.len());
        for (k, &i) in kept.iter().enumerate() {
            prop_assert_eq!(map[i], Some(k));
        }
        let mut reduced = full.clone();
        reduced.rows = kept.iter().map(|&i| full.rows[i].clone()).collect();
        let after = sx.solve().unwrap();
        prop_assert_eq!(after.status, LpStatus::Optimal);
        prop_assert!(close(after.objective, before.objective, 1e-8), "{} vs {}", after.objective, before.objective);
        prop_assert!(close(solve(&reduced).unwrap().objective, before.objective, 1e-8));
        prop_assert!(verify_kkt(&reduced, &after).is_ok(1e-7));
    }

    #[test]
    fn cutoff_stops_only_below_the_optimum(seed in any::<u64>(), n in 2usize..8, m in 1usize..6, extra in 1usize..6, shift in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let full = random_feasible_lp(&mut rng, n, m + extra);
        let opt = solve(&full).unwrap();
        prop_assume!(opt.status == LpStatus::Optimal && shift.abs() > 1e-3);
        let mut base = full.clone();
        base.rows.truncate(m);
        let mut sx = Simplex::new(&base).unwrap();
        prop_assert_eq!(sx.solve().unwrap().status, LpStatus::Optimal);
        for row in &full.rows[m..] {
            sx.add_row(row).unwrap();
        }
        let cutoff = opt.objective + shift;
        sx.set_cutoff(Some(cutoff));
        let s = sx.solve().unwrap();
        if shift < 0.0 {
            prop_assert_eq!(s.status, LpStatus::Optimal);
            prop_assert!(close(s.objective, opt.objective, 1e-8));
        } else if s.status != LpStatus::Cutoff {
            // already optimal before any dual pivot
            prop_assert_eq!(s.status, LpStatus::Optimal);
            prop_assert!(close(s.objective, opt.objective, 1e-8));
        }
        // lifting the cutoff recovers the optimum
        sx.set_cutoff(None);
        let s = sx.solve().unwrap();
        prop_assert_eq!(s.status, LpStatus::Optimal);
        prop_assert!(close(s.objective, opt.objective, 1e-8));
    }
}

#[test]
fn many_rows_appended_in_batches() {
    // max sum t_i with t_i <= a_ik + b_ik x, x in [0,1]^3, sum x <= 2
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n_t = 300;
    let mut p = LpProblem::new();
    let xs: Vec<usize> = (0..3).map(|_| p.add_var(0.0, 0.0, 1.0)).collect();
    let ts: Vec<usize> = (0..n_t).map(|_| p.add_var(1.0 / n_t as f64, 0.0, 100.0)).collect();
    p.add_row(xs.iter().map(|&j| (j, 1.0)).collect(), RowKind::Le, 2.0);
    let mut sx = Simplex::new(&p).unwrap();
    let mut all = p.clone();
    for _round in 0..5 {
        for &t in &ts {
            let mut coeffs = vec![(t, 1.0)];
            for &x in &xs {
                coeffs.push((x, -rng.random_range(0.0..10.0)));
            }
            let row = LpRow::new(coeffs, RowKind::Le, rng.random_range(0.0..5.0));
            sx.add_row(&row).unwrap();
            all.rows.push(row);
        }
        let warm = sx.solve().unwrap();
        let cold = solve(&all).unwrap();
        assert!(close(warm.objective, cold.objective, 1e-9));
        assert!(verify_kkt(&all, &warm).is_ok(1e-7));
    }
}
