//! Randomized invariants over operator and norm parameters.

use proptest::prelude::*;
use snse::field::{forward_transform, lp_norm};
use snse::noise::{trajectory_rng, wiener_increment};
use snse::operators::{gaussian_projector, leray_project, CutoffSpec};
use snse::sampling::random_field;
use snse::Grid;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lp_norm_is_absolutely_homogeneous(seed in 0u64..1000, lam in -3.0f64..3.0, q in 1.0f64..6.0) {
        let grid = Grid::cube(2, 8, 2.0).unwrap();
        let f = random_field(&grid, seed);
        let mut g = f.clone();
        g.scale(lam);
        let a = lp_norm(&g, q).unwrap();
        let b = lam.abs() * lp_norm(&f, q).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-30));
    }

    #[test]
    fn projector_contracts_for_any_level(seed in 0u64..1000, n in 0.25f64..32.0, q in 1.0f64..6.0) {
        let grid = Grid::cube(2, 8, 2.0).unwrap();
        let f = random_field(&grid, seed);
        let pf = gaussian_projector(&f, n).unwrap();
        prop_assert!(lp_norm(&pf, q).unwrap() <= (1.0 + 1e-10) * lp_norm(&f, q).unwrap());
    }

    #[test]
    fn leray_output_is_always_divergence_free(seed in 0u64..1000) {
        let grid = Grid::cube(3, 8, 2.0).unwrap();
        let p = leray_project(&random_field(&grid, seed)).unwrap();
        prop_assert!(forward_transform(&p).unwrap().divergence_rel() <= 1e-10);
    }

    #[test]
    fn cutoff_is_within_unit_interval_and_nonincreasing(level in 0.5f64..64.0, t in 0.0f64..1000.0) {
        let spec = CutoffSpec::new(level).unwrap();
        let v = spec.phi(t).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        let w = spec.phi(t + 0.1).unwrap();
        prop_assert!(w <= v + 1e-15);
    }

    #[test]
    fn wiener_increments_are_reproducible(master in 0u64..1000, traj in 0u64..8) {
        let mut a = trajectory_rng(master, traj);
        let mut b = trajectory_rng(master, traj);
        let da = wiener_increment(&mut a, 1e-3, 8).unwrap();
        let db = wiener_increment(&mut b, 1e-3, 8).unwrap();
        prop_assert_eq!(da.values(), db.values());
    }
}
