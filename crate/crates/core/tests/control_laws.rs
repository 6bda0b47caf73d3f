//! Property-level checks of the tracking-control layer: pole placement
//! against independent eigensolves, scalar/multichannel law agreement, and
//! tracking-coordinate behavior on and off the tracking manifold.

use consensus_observer::control::{
    closed_loop_xi_matrix, default_poles, mimo_decentralized, pole_placement_companion,
    siso_decentralized, tracking_coords, FeedbackGain,
};
use consensus_observer::linalg;
use consensus_observer::models;
use num_complex::Complex64;
use proptest::prelude::*;

fn spaced_stable_poles(r: usize) -> impl Strategy<Value = Vec<Complex64>> {
    // Gaps of at least 0.1 keep the roots simple, so the eigensolve
    // cross-check is well conditioned.
    proptest::collection::vec(0.1f64..4.0, r).prop_map(|gaps| {
        let mut acc = 0.5;
        gaps.iter()
            .map(|g| {
                acc += g;
                Complex64::new(-acc, 0.0)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn placed_poles_survive_an_eigensolve(r in 1usize..=4, seed_gaps in proptest::collection::vec(0.1f64..4.0, 4)) {
        let mut acc = 0.5;
        let poles: Vec<Complex64> = seed_gaps[..r]
            .iter()
            .map(|g| {
                acc += g;
                Complex64::new(-acc, 0.0)
            })
            .collect();
        let gain = FeedbackGain::from_poles(vec![poles.clone()]).unwrap();
        let m = closed_loop_xi_matrix(&gain, &[r]).unwrap();
        let spectrum = linalg::eigenvalues(&m).unwrap();
        let mut remaining = poles;
        for ev in spectrum.eigenvalues() {
            let (idx, dist) = remaining
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - ev).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            prop_assert!(dist <= 1e-6, "pole {ev} off by {dist:.3e}");
            remaining.swap_remove(idx);
        }
    }

    #[test]
    fn companion_polynomial_vanishes_at_its_roots(poles in spaced_stable_poles(3)) {
        let k = pole_placement_companion(&poles, 3).unwrap();
        for p in &poles {
            // Monic polynomial with coefficients -k evaluated at a root.
            let mut val = Complex64::new(1.0, 0.0);
            for j in (0..3).rev() {
                val = val * p - k[j];
            }
            let scale = p.norm().powi(3).max(1.0);
            prop_assert!(val.norm() <= 1e-9 * scale, "residual {val} at {p}");
        }
    }

    #[test]
    fn scalar_and_single_channel_laws_agree(
        x1 in -2.0f64..2.0, x2 in -2.0f64..2.0,
        w1 in -2.0f64..2.0, w2 in -2.0f64..2.0,
        exponent in 1u8..=3,
    ) {
        let fm = models::poly_follower(f64::from(exponent));
        let leader = models::vdp_leader();
        let gain = FeedbackGain::for_follower(&fm).unwrap();
        let x = [x1, x2];
        let w = [w1, w2];
        let scalar = siso_decentralized(&fm, &x, &w, &leader, &gain).unwrap();
        let vector = mimo_decentralized(&fm, &x, &w, &leader, &gain).unwrap();
        prop_assert_eq!(vector.len(), 1);
        prop_assert_eq!(scalar, vector[0]);
    }

    #[test]
    fn manifold_states_zero_the_tracking_coordinates(w1 in -2.0f64..2.0, w2 in -2.0f64..2.0) {
        let fm = models::poly_follower(2.0);
        let leader = models::vdp_leader();
        let w = [w1, w2];
        let x = [w1, w2 - w1];
        let ts = tracking_coords(&fm, &x, &w, &leader);
        for v in ts.xi {
            prop_assert!(v.abs() <= 1e-13);
        }
    }
}

#[test]
fn default_designs_for_builtin_followers_are_stable() {
    for name in ["poly", "zero_dyn", "esslm_follower"] {
        let fm = models::follower_by_name(name, 2.0).unwrap();
        let gain = FeedbackGain::for_follower(&fm).unwrap();
        let m = closed_loop_xi_matrix(&gain, fm.rel_degrees()).unwrap();
        assert!(
            linalg::is_hurwitz(&m, 0.0).unwrap(),
            "{name}: closed loop not Hurwitz"
        );
        for (row, poles) in gain.per_output().iter().zip(gain.poles()) {
            assert_eq!(row.len(), poles.len());
        }
    }
}

#[test]
fn pole_sets_start_with_the_study_pair() {
    assert_eq!(
        default_poles(2),
        vec![Complex64::new(-2.0, 0.0), Complex64::new(-6.0, 0.0)]
    );
}
