//! Randomized invariants of the swarm: bounds, best tracking, determinism.

mod common;

use proptest::prelude::*;
use psofl::pso::{
    sequential, CoefficientMode, Direction, PsoCoefficients, SearchBounds, SwarmState, UpdateRule,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn swarm_stays_in_bounds_and_bests_never_regress(case in common::swarm_case()) {
        common::check_swarm_bounds(&case)?;
    }

    #[test]
    fn runs_are_reproducible_and_respect_budgets(case in common::run_case()) {
        common::check_run_determinism(&case)?;
    }

    #[test]
    fn without_attraction_velocity_decays_by_inertia(
        seed in any::<u64>(),
        w in 0.05f64..0.99,
        steps in 1usize..6,
    ) {
        // a wide box keeps every particle clear of the walls
        let bounds = SearchBounds::new((1, 1_000_000), (1, 1_000_000), (1, 1_000_000)).unwrap();
        let coef = PsoCoefficients { w, c1: 0.0, c2: 0.0 };
        let mut swarm = SwarmState::new(bounds, 3, seed, Direction::Maximize).unwrap();
        let mut eval = sequential(|_| Ok(0.0));
        swarm.evaluate_initial(&mut eval).unwrap();
        for _ in 0..steps {
            let (lo, hi) = (bounds.lower(), bounds.upper());
            let before: Vec<[f64; 3]> = swarm.particles.iter().map(|p| p.velocity.to_array()).collect();
            let inside = swarm.particles.iter().zip(&before).all(|(p, v)| {
                let x = p.position.to_array();
                (0..3).all(|d| x[d] + w * v[d] >= lo[d] && x[d] + w * v[d] <= hi[d])
            });
            swarm.step(&coef, UpdateRule::Canonical, &mut eval).unwrap();
            if !inside {
                break;
            }
            for (p, v) in swarm.particles.iter().zip(&before) {
                let now = p.velocity.to_array();
                for d in 0..3 {
                    prop_assert!((now[d] - w * v[d]).abs() <= 1e-12 * v[d].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn resolved_coefficients_lie_in_range(seed in any::<u64>(), w in 0.01f64..=1.0) {
        let c = CoefficientMode::Random.resolve(w, seed);
        prop_assert!((0.0..=4.0).contains(&c.c1) && (0.0..=4.0).contains(&c.c2));
        prop_assert_eq!(c.w, w);
        prop_assert_eq!(c, CoefficientMode::Random.resolve(w, seed));
    }
}
