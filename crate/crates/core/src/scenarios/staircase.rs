//! A four-dimensional staircase system whose control enters through
//! `cos u` and `sin u`:
//!
//! ```text
//! ẋ₁ = x₃,  ẋ₂ = x₁² + x₄,  ẋ₃ = k₁ cos u,  ẋ₄ = k₂ sin u − 2x₁x₃.
//! ```
//!
//! The chart `z = (x₁, x₃, x₂, x₁² + x₄)` gives two double integrators,
//! `ż₂ = k₁ cos u` and `ż₄ = k₂ sin u`. Step 1 uses `u ∈ {0, π}`, which
//! leaves `ż₄ = 0`; step 2 uses `u = ±π/2`, which leaves the first block at
//! rest. Both steps are time-optimal bang-bang arcs.
//!
//! Not part of the command-line registry; build it with [`staircase`].

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use super::{const_gradient, ProbeFields, Scenario};
use crate::error::{Error, Result};
use crate::mappability::VectorField;
use crate::stepwise::{
    BlockPartition, BlockSystem, ControlLaw, CurveResidual, CurveSwitch, StepPolicy,
};

pub fn to_z(x: &[f64]) -> Vec<f64> {
    vec![x[0], x[2], x[1], x[0] * x[0] + x[3]]
}

pub fn from_z(z: &[f64]) -> Vec<f64> {
    vec![z[0], z[2], z[1], z[3] - z[0] * z[0]]
}

/// Minimum time to bring `(pos, vel)` to rest under `ẍ = ±a`.
pub fn bang_bang_time(pos: f64, vel: f64, a: f64) -> f64 {
    let r = pos + vel * vel.abs() / (2.0 * a);
    let (p, v) = if r > 0.0 { (pos, vel) } else { (-pos, -vel) };
    v / a + 2.0 * (p / a + v * v / (2.0 * a * a)).max(0.0).sqrt()
}

/// `pos + vel|vel|/(2a)`: negative below the switching curve.
fn curve(a: f64) -> CurveResidual {
    Arc::new(move |pos: f64, vel: f64| Ok(pos + vel * vel.abs() / (2.0 * a)))
}

fn constant(u: f64) -> ControlLaw {
    Arc::new(move |_: &[f64]| Ok(u))
}

/// Build the scenario for accelerations `k₁, k₂ > 0`.
pub fn staircase(k1: f64, k2: f64) -> Result<Scenario> {
    for (name, k) in [("k1", k1), ("k2", k2)] {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "staircase {name} must be positive, got {k}"
            )));
        }
    }
    let params: BTreeMap<String, f64> = [("k1".to_string(), k1), ("k2".to_string(), k2)].into();
    Ok(Scenario {
        name: "staircase".into(),
        n: 4,
        dynamics: Arc::new(move |x: &[f64], u: f64| {
            vec![
                x[2],
                x[0] * x[0] + x[3],
                k1 * u.cos(),
                k2 * u.sin() - 2.0 * x[0] * x[2],
            ]
        }),
        to_z: Arc::new(to_z),
        from_z: Arc::new(from_z),
        system: BlockSystem::new(
            BlockPartition::new(vec![2, 2])?,
            Arc::new(move |_: &[f64], u: f64| vec![k1 * u.cos(), k2 * u.sin()]),
        ),
        policies: vec![
            StepPolicy::CurveSwitch(CurveSwitch::new(curve(k1), constant(0.0), constant(PI))),
            StepPolicy::CurveSwitch(CurveSwitch::new(
                curve(k2),
                constant(FRAC_PI_2),
                constant(-FRAC_PI_2),
            )),
        ],
        params,
        // The second block coasts at constant velocity during step 1.
        analytic_schedule: Some(Arc::new(move |z: &[f64]| {
            let t1 = bang_bang_time(z[0], z[1], k1);
            let t2 = t1 + bang_bang_time(z[2] + z[3] * t1, z[3], k2);
            Ok(vec![t1, t2])
        })),
        probe: ProbeFields {
            a: VectorField::new(4, |x| {
                vec![x[2], x[0] * x[0] + x[3], 0.0, -2.0 * x[0] * x[2]]
            }),
            bs: vec![VectorField::unit(4, 2), VectorField::unit(4, 3)],
            phi_grads: vec![
                const_gradient(vec![1.0, 0.0, 0.0, 0.0]),
                const_gradient(vec![0.0, 1.0, 0.0, 0.0]),
            ],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bang_bang_examples() {
        assert_eq!(bang_bang_time(0.0, 0.0, 1.0), 0.0);
        // From rest at distance 1: accelerate half way, brake half way.
        assert_abs_diff_eq!(bang_bang_time(1.0, 0.0, 1.0), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(bang_bang_time(-1.0, 0.0, 1.0), 2.0, epsilon = 1e-14);
        // On the curve a single braking arc suffices.
        assert_abs_diff_eq!(bang_bang_time(0.5, -1.0, 1.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(bang_bang_time(2.0, 0.0, 2.0), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_nonpositive_gains() {
        assert!(staircase(0.0, 1.0).unwrap_err().is_validation());
        assert!(staircase(1.0, f64::NAN).unwrap_err().is_validation());
    }

    #[test]
    fn charts_are_inverse() {
        let x = [0.3, -0.7, 1.1, 0.4];
        let back = from_z(&to_z(&x));
        for (a, b) in x.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }
}
