mod common;

use exact_tsa::lp::{solve, verify_kkt, LpStatus, PivotRule, SolveOptions};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_solutions_pass_kkt(seed in any::<u64>()) {
        let lp = common::random_feasible(seed, 40);
        let sol = solve(&lp, &SolveOptions::default()).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let r = verify_kkt(&lp, &sol, 1e-7);
        prop_assert!(r.passed(), "{:?}", r);
    }

    #[test]
    fn repeated_solves_are_identical(seed in any::<u64>()) {
        let lp = common::random_feasible(seed, 30);
        let a = solve(&lp, &SolveOptions::default()).unwrap();
        let b = solve(&lp, &SolveOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scaling_costs_scales_objective(seed in any::<u64>(), k in 0.1f64..50.0) {
        let lp = common::random_feasible(seed, 30);
        let mut scaled = lp.clone();
        scaled.cost.iter_mut().for_each(|c| *c *= k);
        let a = solve(&lp, &SolveOptions::default()).unwrap();
        let b = solve(&scaled, &SolveOptions::default()).unwrap();
        prop_assert!((b.objective - k * a.objective).abs() <= 1e-7 * (1.0 + (k * a.objective).abs()));
    }

    #[test]
    fn bland_rule_reaches_the_same_optimum(seed in any::<u64>()) {
        let lp = common::random_feasible(seed, 25);
        let a = solve(&lp, &SolveOptions::default()).unwrap();
        let bland = SolveOptions { pivot_rule: PivotRule::Bland, ..Default::default() };
        let b = solve(&lp, &bland).unwrap();
        prop_assert_eq!(b.status, LpStatus::Optimal);
        prop_assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + a.objective.abs()));
    }

    #[test]
    fn matches_vertex_enumeration(seed in any::<u64>()) {
        let lp = common::random_small(seed, 10);
        let sol = solve(&lp, &SolveOptions::default()).unwrap();
        let best = common::vertex_enumeration(&lp).unwrap();
        prop_assert!((sol.objective - best).abs() <= 1e-9 * best.abs().max(1.0));
    }
}

#[test]
fn infeasible_and_unbounded_are_classified() {
    for seed in 0..20 {
        let sol = solve(&common::random_infeasible(seed), &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible, "seed {seed}");
        let sol = solve(&common::random_unbounded(seed), &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded, "seed {seed}");
    }
}
