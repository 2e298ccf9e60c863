mod common;

use common::*;
use mmu_core::benders::{solve_benders, BendersOptions, DualForm, InitialCuts, Separation};
use mmu_core::deterministic::solve_compact;
use mmu_core::fixtures::{tiny1, tiny1_unc, tiny1_unc_roomy};
use mmu_core::model::{check_plan, plan_cost};
use mmu_core::robust::{solve_budgeted, solve_budgeted_with, solve_interval};
use mmu_core::{SolveConfig, SolveError, SolveReport};
use mmu_planner::{HighsSolver, MicrolpSolver};
use proptest::prelude::*;

fn value(r: Result<SolveReport, SolveError>) -> Option<u64> {
    match r {
        Ok(rep) => Some(rep.objective),
        Err(SolveError::Infeasible | SolveError::RobustInfeasible) => None,
        Err(e) => panic!("solve failed: {e}"),
    }
}

#[test]
fn tiny1_costs_four_everywhere() {
    let cfg = SolveConfig::default();
    for rep in [
        solve_compact(&tiny1(), &HighsSolver, &cfg).unwrap(),
        solve_benders(&tiny1(), &BendersOptions::default(), &HighsSolver, &cfg).unwrap(),
        solve_benders(&tiny1(), &BendersOptions { separation: Separation::Lp, ..Default::default() }, &HighsSolver, &cfg).unwrap(),
        solve_compact(&tiny1(), &MicrolpSolver, &cfg).unwrap(),
    ] {
        assert_eq!(rep.objective, 4);
        assert_eq!(rep.plan.sessions, vec![2]);
        assert!(check_plan(&tiny1(), &rep.plan).is_empty());
    }
}

#[test]
fn tiny1_robust_verdicts() {
    let cfg = SolveConfig::default();
    assert!(matches!(solve_budgeted(&tiny1_unc(), None, &HighsSolver, &cfg), Err(SolveError::RobustInfeasible)));
    assert!(matches!(
        solve_interval(&tiny1_unc(), &BendersOptions::default(), &HighsSolver, &cfg),
        Err(SolveError::RobustInfeasible)
    ));
    let roomy = tiny1_unc_roomy();
    let b = solve_budgeted(&roomy, None, &HighsSolver, &cfg).unwrap();
    let i = solve_interval(&roomy, &BendersOptions::default(), &HighsSolver, &cfg).unwrap();
    assert!(b.objective <= i.objective);
}

#[test]
fn interval_is_compact_on_upper_bounds() {
    let cfg = SolveConfig::default();
    for seed in 0..15 {
        let inst = random_instance(600 + seed, Shape::new(8, 4, 2, 4));
        let interval = value(solve_interval(&inst, &BendersOptions::default(), &HighsSolver, &cfg));
        let compact = value(solve_compact(&inst.worst_case_copy(), &HighsSolver, &cfg));
        assert_eq!(interval, compact, "seed {seed}");
    }
}

#[test]
fn reduced_and_full_dual_blocks_agree() {
    let cfg = SolveConfig::default();
    for seed in 0..12 {
        let inst = random_instance(700 + seed, Shape::new(8, 4, 2, 4));
        let reduced = value(solve_budgeted_with(&inst, DualForm::Reduced, None, &HighsSolver, &cfg));
        let full = value(solve_budgeted_with(&inst, DualForm::Full, None, &HighsSolver, &cfg));
        assert_eq!(reduced, full, "seed {seed}");
    }
}

#[test]
fn singleton_warm_start_keeps_the_optimum() {
    let cfg = SolveConfig::default();
    for seed in 0..10 {
        let inst = random_instance(800 + seed, Shape::new(10, 4, 3, 4));
        let cold = value(solve_benders(&inst, &BendersOptions::default(), &HighsSolver, &cfg));
        let warm = value(solve_benders(&inst, &BendersOptions { initial_cuts: InitialCuts::Singletons, ..Default::default() }, &HighsSolver, &cfg));
        assert_eq!(cold, warm, "seed {seed}");
    }
}

#[test]
fn returned_plans_are_complete_and_priced() {
    let cfg = SolveConfig::default();
    for seed in 0..10 {
        let inst = random_instance(900 + seed, Shape::new(10, 4, 3, 4));
        for rep in [solve_compact(&inst, &HighsSolver, &cfg), solve_benders(&inst, &BendersOptions::default(), &HighsSolver, &cfg)]
            .into_iter()
            .flatten()
        {
            assert!(check_plan(&inst, &rep.plan).is_empty(), "seed {seed}: {:?}", check_plan(&inst, &rep.plan));
            assert_eq!(plan_cost(&inst, &rep.plan), rep.objective, "seed {seed}");
            let (d, u) = nominal(&inst);
            assert!(serves(&inst, &rep.plan.setup, &rep.plan.sessions, &d, &u), "seed {seed}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backends_agree_on_small_instances(seed in 0u64..10_000) {
        let inst = random_instance(seed, Shape::new(5, 3, 2, 3));
        let cfg = SolveConfig::default();
        let highs = value(solve_compact(&inst, &HighsSolver, &cfg));
        let micro = value(solve_compact(&inst, &MicrolpSolver, &cfg));
        prop_assert_eq!(highs, micro);
        prop_assert_eq!(highs, brute_force_optimum(&inst));
    }

    #[test]
    fn benders_matches_compact(seed in 0u64..10_000) {
        let inst = random_instance(seed, Shape::new(10, 4, 3, 4));
        let cfg = SolveConfig::default();
        let compact = value(solve_compact(&inst, &HighsSolver, &cfg));
        let benders = value(solve_benders(&inst, &BendersOptions::default(), &HighsSolver, &cfg));
        prop_assert_eq!(compact, benders);
    }

    #[test]
    fn robust_objectives_are_ordered(seed in 0u64..10_000) {
        let inst = random_instance(seed, Shape::new(8, 4, 2, 4));
        let cfg = SolveConfig::default();
        let inf = u64::MAX;
        let det = value(solve_compact(&inst, &HighsSolver, &cfg)).unwrap_or(inf);
        let bud = value(solve_budgeted(&inst, None, &HighsSolver, &cfg)).unwrap_or(inf);
        let int = value(solve_interval(&inst, &BendersOptions::default(), &HighsSolver, &cfg)).unwrap_or(inf);
        prop_assert!(det <= bud && bud <= int, "{} {} {}", det, bud, int);
    }
}
