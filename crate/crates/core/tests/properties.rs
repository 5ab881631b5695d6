//! Property tests for the controllability function and the Gramian family.

use approx::assert_relative_eq;
use proptest::prelude::*;

use stepsynth::ctrl_fn::{a0_max, LinearSynth};
use stepsynth::gramian::GramSet;

fn chain_state(k: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, k), -3.0f64..3.0)
        .prop_filter("nonzero", |(x, _)| x.iter().any(|v| v.abs() > 1e-6))
        .prop_map(|(x, e)| x.into_iter().map(|v| v * 10f64.powf(e)).collect())
}

fn sized_state() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=5).prop_flat_map(|k| (Just(k), chain_state(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn feedback_respects_bound((k, x) in sized_state(), d in 0.1f64..10.0) {
        let g = GramSet::new(k).unwrap();
        let s = LinearSynth::new(g.clone(), a0_max(&g, d), d).unwrap();
        let e = s.theta_of(&x).unwrap();
        prop_assert!(e.v.abs() <= d + 1e-9);
        prop_assert!(e.theta > 0.0);
    }

    #[test]
    fn theta_solves_its_equation((k, x) in sized_state()) {
        let s = LinearSynth::with_max_a0(GramSet::new(k).unwrap(), 1.0).unwrap();
        let e = s.theta_of(&x).unwrap();
        let lhs = 2.0 * s.a0() * e.theta;
        let rhs = s.quadratic_form(&x, e.theta);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
    }

    #[test]
    fn sigma_and_v_have_opposite_signs((k, x) in sized_state()) {
        let s = LinearSynth::with_max_a0(GramSet::new(k).unwrap(), 1.0).unwrap();
        let e = s.theta_of(&x).unwrap();
        prop_assert_eq!(e.v, -0.5 * e.sigma);
        prop_assert!(e.sigma == 0.0 || (e.sigma > 0.0) == (e.v < 0.0));
    }

    #[test]
    fn dilation_scales_theta_only((k, x) in sized_state(), s in prop::sample::select(vec![0.25, 0.7, 4.0])) {
        let synth = LinearSynth::with_max_a0(GramSet::new(k).unwrap(), 1.0).unwrap();
        let base = synth.theta_of(&x).unwrap();
        let scaled: Vec<f64> = x.iter().enumerate().map(|(j, v)| v * f64::powi(s, (k - j) as i32)).collect();
        let e = synth.theta_of(&scaled).unwrap();
        prop_assert!((e.theta - s * base.theta).abs() <= 1e-9 * s * base.theta);
        prop_assert!((e.v - base.v).abs() <= 1e-9);
    }

    #[test]
    fn gramian_dilation_identity(k in 1usize..=8, theta in 0.1f64..10.0) {
        let g = GramSet::new(k).unwrap();
        let dm = nalgebra::DMatrix::from_diagonal(&g.dilation(theta));
        let back = &dm * g.gram_theta(theta) * &dm;
        for (a, b) in back.iter().zip(g.n1().iter()) {
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn weighted_gramians_recombine(k in 1usize..=8, theta in 0.1f64..10.0) {
        let g = GramSet::new(k).unwrap();
        let n = g.gram_theta(theta);
        let combo = (g.gram_hat(theta) - g.gram_tilde(theta)) * theta;
        for (a, b) in combo.iter().zip(n.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300) + 1e-15);
        }
    }
}

#[test]
fn a0_max_examples() {
    assert_relative_eq!(a0_max(&GramSet::new(1).unwrap(), 1.0), 1.0, epsilon = 1e-14);
    assert_relative_eq!(
        a0_max(&GramSet::new(2).unwrap(), 3f64.sqrt()),
        1.0,
        epsilon = 1e-12
    );
    assert_relative_eq!(a0_max(&GramSet::new(2).unwrap(), 3.0), 3.0, epsilon = 1e-12);
}
