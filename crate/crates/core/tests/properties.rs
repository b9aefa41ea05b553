use proptest::prelude::*;
use std::f64::consts::TAU;

use starkecho::analysis::{equator_fidelity, pole_fidelity, total_fidelity};
use starkecho::analytic::{self, CavityParams};
use starkecho::pathways::silencing_factor;
use starkecho::scenario::{bundled, Scenario};
use starkecho::Direction;

proptest! {
    #[test]
    fn silencing_is_bounded_and_periodic(phase in -50.0f64..50.0, sigma in 0.0f64..2.0) {
        let s = silencing_factor(phase, sigma);
        prop_assert!((0.0..=1.0).contains(&s));
        let shifted = silencing_factor(phase + TAU, 0.0);
        prop_assert!((silencing_factor(phase, 0.0) - shifted).abs() < 1e-9);
    }

    #[test]
    fn retrieval_is_a_probability(d in 0.0f64..50.0) {
        for dir in [Direction::Forward, Direction::Backward] {
            let e = analytic::retrieval_efficiency(d, dir).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
        }
        prop_assert!(analytic::retrieval_efficiency(d, Direction::Forward).unwrap()
            <= 4.0 * (-2.0f64).exp() + 1e-15);
    }

    #[test]
    fn cavity_efficiency_is_a_probability(r1 in 0.0f64..0.999, r2 in 0.5f64..0.999, d in 0.01f64..5.0) {
        let e = analytic::cavity_retrieval(&CavityParams { r1, r2, d }).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&e), "{}", e);
    }

    #[test]
    fn decay_is_monotone_in_storage(a in 0.0f64..40.0, b in 0.0f64..40.0, extra in 0.0f64..10.0) {
        let f = |a, b| analytic::decay_factor(17.4, 21.9, 11.0, a, b).unwrap();
        prop_assert!(f(a + extra, b) <= f(a, b));
        prop_assert!(f(a, b + extra) <= f(a, b));
    }

    #[test]
    fn control_efficiency_round_trips(eta in 0.01f64..0.99) {
        let r = analytic::se_to_4le_ratio(eta);
        let back = analytic::infer_control_efficiency(r, 1.0, 1.0).unwrap();
        prop_assert!((back / eta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelities_stay_in_range(s in 0.0f64..1e4, n in 0.0f64..1e3, v in 0.0f64..=1.0) {
        prop_assume!(s + 2.0 * n > 0.0);
        let fe = pole_fidelity(s, n).unwrap();
        prop_assert!((0.5..=1.0).contains(&fe));
        let fp = equator_fidelity(v).unwrap();
        let t = total_fidelity(fe, fe, fp, fp).unwrap();
        prop_assert!((0.5..=1.0).contains(&t.f_total));
    }

    #[test]
    fn scenario_seed_and_size_round_trip(seed in any::<u64>(), n in 1usize..1_000_000) {
        let mut s = bundled("forward").unwrap();
        s.simulation.seed = seed;
        s.simulation.n_ions = n;
        let back = Scenario::from_json(&s.to_json()).unwrap();
        prop_assert_eq!(s, back);
    }
}
