use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use medrelax::lattice::{Lattice, ShieldPlan};
use medrelax::med::{
    family_inner, med_functional, med_gradient, solve_med, MarginalFamily, SolverOptions,
};
use medrelax::models::random_two_local_chain;
use medrelax::operator::{
    conditional_mutual_information, partial_trace, random, trace_distance, von_neumann_entropy,
};
use medrelax::oracle::{solve_gibbs, variational_free_energy};
use medrelax::petz::{rotated_petz_channel, PetzOptions, QuadratureScheme};
use medrelax::rounding::layer_budget;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partial_traces_compose(seed in any::<u64>(), rank in 1usize..9) {
        let rho = random::density_matrix(&mut rng(seed), vec![0, 1, 2], 2, Some(rank)).unwrap();
        let direct = partial_trace(&rho, &[2]).unwrap();
        let staged = partial_trace(&partial_trace(&rho, &[1, 2]).unwrap(), &[2]).unwrap();
        prop_assert!(trace_distance(&direct, &staged).unwrap() < 1e-13);
        prop_assert!((direct.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_subadditivity(seed in any::<u64>(), rank in 1usize..9) {
        let rho = random::density_matrix(&mut rng(seed), vec![0, 1, 2], 2, Some(rank)).unwrap();
        let s = |keep: &[usize]| von_neumann_entropy(&rho.partial_trace(keep).unwrap());
        let raw = s(&[0, 1]) + s(&[1, 2]) - s(&[0, 1, 2]) - s(&[1]);
        prop_assert!(raw > -1e-10, "{raw}");
        let clipped = conditional_mutual_information(&rho, &[0], &[1], &[2]).unwrap();
        prop_assert!(clipped >= 0.0);
    }

    #[test]
    fn entropy_bounds(seed in any::<u64>(), rank in 1usize..5) {
        let rho = random::density_matrix(&mut rng(seed), vec![0, 1], 2, Some(rank)).unwrap();
        let s = von_neumann_entropy(&rho);
        prop_assert!(s >= -1e-12 && s <= (rank as f64).ln() + 1e-12);
    }

    #[test]
    fn trace_distance_is_a_metric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random::density_matrix(&mut r, vec![0, 1], 2, None).unwrap();
        let b = random::density_matrix(&mut r, vec![0, 1], 2, None).unwrap();
        let c = random::density_matrix(&mut r, vec![0, 1], 2, None).unwrap();
        let ab = trace_distance(&a, &b).unwrap();
        prop_assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-13);
        prop_assert!(ab <= trace_distance(&a, &c).unwrap() + trace_distance(&c, &b).unwrap() + 1e-13);
        prop_assert!(ab <= 2.0 + 1e-12);
    }

    #[test]
    fn depolarizing_keeps_trace(seed in any::<u64>(), w in 0.0f64..1.0) {
        let rho = random::density_matrix(&mut rng(seed), vec![0, 1], 2, Some(1)).unwrap();
        let mixed = rho.depolarize(w);
        prop_assert!((mixed.trace() - 1.0).abs() < 1e-12);
        prop_assert!(mixed.min_eigenvalue().unwrap() >= w / 4.0 - 1e-12);
    }

    #[test]
    fn variational_principle(seed in any::<u64>()) {
        let h = random_two_local_chain(3, 0.8, seed % 1000).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let sigma = random::density_matrix(&mut rng(seed), vec![0, 1, 2], 2, None).unwrap();
        prop_assert!(variational_free_energy(&h, &sigma).unwrap() >= sol.free_energy() - 1e-12);
    }

    #[test]
    fn budget_is_monotone(c in 0.0f64..1.0, s in 0.0f64..1.0, dc in 0.0f64..0.1, ds in 0.0f64..0.1) {
        prop_assert!(layer_budget(c, s, 2) <= layer_budget(c + dc, s + ds, 2) + 1e-15);
        prop_assert_eq!(layer_budget(0.0, 0.0, 2), 0.0);
    }

    #[test]
    fn quadrature_mass_grows_with_truncation(t in 0.5f64..6.0) {
        let a = QuadratureScheme::gauss_legendre(t, 128).beta_mass();
        let b = QuadratureScheme::gauss_legendre(t + 0.5, 128).beta_mass();
        prop_assert!(a < b && b < 1.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn petz_map_is_a_channel_that_fixes_its_state(seed in any::<u64>()) {
        let rho = random::floored_density_matrix(&mut rng(seed), vec![0, 1], 2, 0.02).unwrap();
        let petz = rotated_petz_channel(&rho, &[0], &PetzOptions::default()).unwrap();
        prop_assert!(petz.report.cp_defect < 1e-10);
        prop_assert!(petz.report.tp_defect < 1e-7);
        let rho_b = partial_trace(&rho, &[0]).unwrap();
        let back = petz.channel.apply(&rho_b).unwrap();
        prop_assert!(trace_distance(&back, &rho).unwrap() < 1e-7);
    }

    #[test]
    fn med_is_a_lower_bound(seed in 0u64..1000) {
        let h = random_two_local_chain(4, 0.7, seed).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let plan = Arc::new(ShieldPlan::consecutive(h.lattice(), 1, 1).unwrap());
        let med = solve_med(&h, plan, &SolverOptions::default()).unwrap();
        prop_assert!(med.value() <= sol.free_energy() + 1e-8);
    }

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = random_two_local_chain(4, 1.0, seed % 1000).unwrap();
        let plan = Arc::new(ShieldPlan::consecutive(&Lattice::chain(4).unwrap(), 2, 1).unwrap());
        let x = random::floored_density_matrix(&mut r, vec![0, 1, 2, 3], 2, 0.01).unwrap();
        let y = random::floored_density_matrix(&mut r, vec![0, 1, 2, 3], 2, 0.01).unwrap();
        let fx = MarginalFamily::from_state(plan.clone(), &x).unwrap();
        let fy = MarginalFamily::from_state(plan, &y).unwrap();
        let dir: Vec<_> = fy.blocks().iter().zip(fx.blocks()).map(|(a, b)| a.minus(b).unwrap()).collect();
        let analytic = family_inner(&med_gradient(&fx, &h).unwrap(), &dir).unwrap();
        let step = 1e-5;
        let plus = med_functional(&fx.shifted(&dir, step).unwrap(), &h).unwrap();
        let minus = med_functional(&fx.shifted(&dir, -step).unwrap(), &h).unwrap();
        let numeric = (plus - minus) / (2.0 * step);
        prop_assert!((analytic - numeric).abs() <= 1e-5 * analytic.abs().max(1e-3));
    }
}
