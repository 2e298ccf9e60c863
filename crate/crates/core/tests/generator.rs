use mmu_core::instgen::{derive_budgets, derive_demands, generate_instance, GeneratorConfig, GeneratorError};
use mmu_core::model::validate_instance;
use mmu_core::UncertaintyModel;
use proptest::prelude::*;

fn small(seed: u64, omega: f64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        n_cells: 30,
        n_sites: 4,
        n_practices: 2,
        extent_km: 5.0,
        delta_km: 3.0,
        omega,
        demand_mean: 3.0,
        ..GeneratorConfig::default()
    }
}

#[test]
fn budgets_of_the_reference_history() {
    assert_eq!(derive_budgets(&[4041, 3000], 0.2), (3233, 808));
    assert_eq!(derive_budgets(&[4041, 3000], 0.45), (2223, 1818));
}

#[test]
fn same_seed_same_instance() {
    let a = generate_instance(&small(11, 0.3)).unwrap();
    let b = generate_instance(&small(11, 0.3)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.instance, generate_instance(&small(12, 0.3)).unwrap().instance);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_instances_are_valid(seed in 0u64..1_000, omega in 0.0f64..=1.0) {
        match generate_instance(&small(seed, omega)) {
            Ok(g) => {
                prop_assert!(validate_instance(&g.instance).is_empty());
                let UncertaintyModel::Budgeted { gamma_steerable, gamma_walkin } = g.instance.uncertainty else {
                    return Err(TestCaseError::fail("generator must attach budgets"));
                };
                let d: u64 = g.instance.origins.iter().map(|o| o.steerable).sum();
                let u: u64 = g.instance.origins.iter().map(|o| o.walkin).sum();
                prop_assert!(d <= gamma_steerable && u <= gamma_walkin);
                // budgets come from the cells that made it into an origin
                let mut totals = vec![0u64; g.history.weeks()];
                for (cell, rec) in g.cells.iter().enumerate() {
                    if rec.origin.is_some() {
                        totals.iter_mut().zip(&g.history.visits[cell]).for_each(|(t, x)| *t += x);
                    }
                }
                let (g1, g2) = derive_budgets(&totals, omega);
                let hi1: u64 = g.instance.origins.iter().map(|o| o.steerable_hi).sum();
                let hi2: u64 = g.instance.origins.iter().map(|o| o.walkin_hi).sum();
                prop_assert_eq!((gamma_steerable, gamma_walkin), (g1.min(hi1), g2.min(hi2)));
            }
            Err(GeneratorError::NominalOutsideSets(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn derived_demands_are_ordered(weekly in proptest::collection::vec(0u64..500, 1..60), omega in 0.0f64..=1.0) {
        let d = derive_demands(&weekly, omega);
        prop_assert!(d.steerable_lo <= d.steerable && d.steerable <= d.steerable_hi);
        prop_assert!(d.walkin_lo <= d.walkin && d.walkin <= d.walkin_hi);
        let max = *weekly.iter().max().unwrap();
        prop_assert_eq!(d.steerable_hi + d.walkin_hi, max);
    }
}
