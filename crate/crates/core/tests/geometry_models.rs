//! Cross-validation between the bundled models and the geometric checker:
//! canonical-form conditions on the three leaders, coordinate-change
//! verification where a map is provided, and closed-form Lie data against
//! finite-difference derivatives.

use consensus_observer::geometry::{
    self, lie_derivative, ScalarField, VectorField,
};
use consensus_observer::models;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sample_box(rng: &mut ChaCha8Rng, box_: &[(f64, f64)]) -> Vec<f64> {
    box_.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect()
}

fn samples_in(seed: u64, box_: &[(f64, f64)], count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_box(&mut rng, box_)).collect()
}

#[test]
fn oscillator_leader_passes_canonical_conditions() {
    let model = models::vdp_leader();
    let samples = samples_in(11, &[(-2.0, 2.0), (-2.0, 2.0)], 20);
    let report = geometry::check_ocf_conditions(
        model.p(),
        model.outputs(),
        model.degrees(),
        model.taus(),
        &samples,
        1e-5,
    )
    .unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn manipulator_leader_passes_canonical_conditions() {
    let model = models::esslm_leader_default();
    let samples = samples_in(12, &[(-2.0, 2.0); 4], 4);
    let report = geometry::check_ocf_conditions(
        model.p(),
        model.outputs(),
        model.degrees(),
        model.taus(),
        &samples,
        1e-5,
    )
    .unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn numerical_leader_passes_canonical_conditions() {
    let model = models::example1_leader();
    let samples = samples_in(13, &[(-1.5, 1.5); 4], 10);
    let report = geometry::check_ocf_conditions(
        model.p(),
        model.outputs(),
        model.degrees(),
        model.taus(),
        &samples,
        1e-5,
    )
    .unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn oscillator_coordinate_change_verified() {
    let model = models::vdp_leader();
    let samples = samples_in(14, model.domain_box(), 100);
    let report = geometry::verify_diffeomorphism(&model, &samples, 1e-9).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn manipulator_coordinate_change_verified() {
    let model = models::esslm_leader_default();
    let samples = samples_in(15, model.domain_box(), 100);
    let report = geometry::verify_diffeomorphism(&model, &samples, 1e-6).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn coordinate_change_missing_is_reported() {
    let model = models::example1_leader();
    let samples = samples_in(16, model.domain_box(), 3);
    let err = geometry::verify_diffeomorphism(&model, &samples, 1e-6);
    assert!(matches!(
        err,
        Err(geometry::GeometryError::MissingDiffeomorphism { .. })
    ));
}

/// Wraps a follower's drift and output as geometry fields (the bundled
/// followers ignore the exogenous argument).
fn follower_fields(fm: &models::FollowerModel) -> (VectorField, ScalarField) {
    let n = fm.state_dim();
    let f = {
        let fm = models::follower_by_name(fm.name(), 2.0).unwrap();
        VectorField::new(n, move |x| fm.f(x, &[]))
    };
    let h = {
        let fm = models::follower_by_name(fm.name(), 2.0).unwrap();
        ScalarField::new(n, move |x| fm.output(x)[0])
    };
    (f, h)
}

#[test]
fn polynomial_follower_lie_maps_match_finite_differences() {
    let fm = models::poly_follower(2.0);
    let (f, h) = follower_fields(&fm);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let x = sample_box(&mut rng, &[(-2.0, 2.0), (-2.0, 2.0)]);
        for order in 0..=2 {
            let numeric = lie_derivative(&h, &f, &x, order).unwrap();
            let closed = fm.lie_f(&x, &[], 0, order);
            assert!(
                (numeric - closed).abs() <= 1e-5,
                "order {order} at {x:?}: {numeric} vs {closed}"
            );
        }
    }
}

#[test]
fn zero_dynamics_follower_lie_maps_match_finite_differences() {
    let fm = models::zero_dyn_follower();
    let (f, h) = follower_fields(&fm);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..100 {
        let x = sample_box(&mut rng, &[(-1.5, 1.5); 3]);
        for order in 0..=2 {
            let numeric = lie_derivative(&h, &f, &x, order).unwrap();
            let closed = fm.lie_f(&x, &[], 0, order);
            assert!(
                (numeric - closed).abs() <= 1e-5,
                "order {order} at {x:?}: {numeric} vs {closed}"
            );
        }
    }
}

#[test]
fn follower_decoupling_scalars_match_finite_differences() {
    // L_g of the (r-1)-fold drift derivative, taken numerically along g
    // against the closed-form decoupling entry.
    for name in ["poly", "zero_dyn", "esslm_follower"] {
        let fm = models::follower_by_name(name, 2.0).unwrap();
        let n = fm.state_dim();
        let r = fm.rel_degrees()[0];
        let top = {
            let fm = models::follower_by_name(name, 2.0).unwrap();
            ScalarField::new(n, move |x| fm.lie_f(x, &[], 0, r - 1))
        };
        let g = fm.g()[0].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let x = sample_box(&mut rng, &vec![(-1.5, 1.5); n]);
            let numeric = lie_derivative(&top, &g, &x, 1).unwrap();
            let closed = fm.lie_g(&x, &[], 0, 0);
            assert!(
                (numeric - closed).abs() <= 1e-6,
                "{name} at {x:?}: {numeric} vs {closed}"
            );
        }
    }
}

#[test]
fn manipulator_follower_relative_degree_is_four() {
    // The input must be invisible in the first three output derivatives
    // and show up with gain 2/3 in the fourth.
    let fm = models::esslm_follower();
    let g = fm.g()[0].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..10 {
        let x = sample_box(&mut rng, &[(-1.5, 1.5); 4]);
        for j in 0..3 {
            let level = {
                let fm = models::esslm_follower();
                ScalarField::new(4, move |x| fm.lie_f(x, &[], 0, j))
            };
            let along_g = lie_derivative(&level, &g, &x, 1).unwrap();
            assert!(
                along_g.abs() <= 1e-8,
                "input leaks into derivative {j}: {along_g}"
            );
        }
        let top = {
            let fm = models::esslm_follower();
            ScalarField::new(4, move |x| fm.lie_f(x, &[], 0, 3))
        };
        let gain = lie_derivative(&top, &g, &x, 1).unwrap();
        assert!((gain - 2.0 / 3.0).abs() <= 1e-8, "decoupling gain {gain}");
    }
}

#[test]
fn manipulator_follower_lie_maps_match_finite_differences() {
    let fm = models::esslm_follower();
    let (f, h) = follower_fields(&fm);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let x = sample_box(&mut rng, &[(-1.5, 1.5); 4]);
        for order in 0..=4 {
            let numeric = lie_derivative(&h, &f, &x, order).unwrap();
            let closed = fm.lie_f(&x, &[], 0, order);
            assert!(
                (numeric - closed).abs() <= 1e-5,
                "order {order} at {x:?}: {numeric} vs {closed}"
            );
        }
    }
}

#[test]
fn leader_output_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for name in ["vdp", "esslm", "example1"] {
        let model = models::leader_by_name(name).unwrap();
        let s = model.state_dim();
        for _ in 0..5 {
            let x = sample_box(&mut rng, &vec![(-1.5, 1.5); s]);
            for k in 0..model.output_dim() {
                for order in 0..=model.max_output_deriv() {
                    let numeric =
                        lie_derivative(&model.outputs()[k], model.p(), &x, order).unwrap();
                    let closed = model.output_deriv(&x, k, order);
                    assert!(
                        (numeric - closed).abs() <= 1e-5,
                        "{name} output {k} order {order} at {x:?}: {numeric} vs {closed}"
                    );
                }
            }
        }
    }
}
