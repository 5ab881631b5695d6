//! Two-link pendulum driven through `F₁ = αu³` on the first link and
//! `F₂ = u` on the second.
//!
//! State `x = (φ, φ̇, ψ, ψ̇)`. The change of variables
//! `z = (x₁ − x₃, x₂ − x₄, x₃, x₄)` splits it into two 2-blocks: step 1
//! aligns the links (`φ = ψ`, `φ̇ = ψ̇`), step 2 brings the aligned pair to
//! rest while `H₁ = 0` keeps them aligned.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use serde::Serialize;

use super::{const_gradient, ProbeFields, Scenario};
use crate::error::{Error, Result};
use crate::mappability::VectorField;
use crate::numerics::{cubic_roots, integrate};
use crate::stepwise::{
    BlockPartition, BlockSystem, ControlLaw, CurveResidual, CurveSwitch, StepPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PendulumParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
    pub alpha: f64,
    pub eps1p: f64,
    pub eps1m: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            l1: 1.0,
            l2: 1.0,
            g: 1.0,
            alpha: 1.0 / 9.0,
            eps1p: 20.0,
            eps1m: 10.0,
        }
    }
}

/// Absolute tolerance of the `w₂` quadrature.
const W2_TOL: f64 = 1e-10;

impl PendulumParams {
    /// Largest admissible `α`, `(4/27) l₁²/g²`.
    pub fn alpha_max(&self) -> f64 {
        4.0 / 27.0 * self.l1 * self.l1 / (self.g * self.g)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("g", self.g),
            ("alpha", self.alpha),
            ("eps1p", self.eps1p),
            ("eps1m", self.eps1m),
        ];
        if let Some((k, v)) = named.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "pendulum parameter {k} must be positive, got {v}"
            )));
        }
        // Small slack so that the boundary value written as a decimal passes.
        if self.alpha > self.alpha_max() * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {} exceeds (4/27) l1²/g² = {}",
                self.alpha,
                self.alpha_max()
            )));
        }
        Ok(())
    }

    /// Uncontrolled accelerations `(φ̈, ψ̈)` at `x`.
    pub fn drift(&self, x: &[f64]) -> (f64, f64) {
        let &Self {
            m1, m2, l1, l2, g, ..
        } = self;
        let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
        let (sd, cd) = (x1 - x3).sin_cos();
        let den = m1 + m2 * sd * sd;
        let d1 = -(g * m1 * x1.sin() + m2 * sd * (g * x3.cos() + l1 * x2 * x2 * cd + l2 * x4 * x4))
            / (l1 * den);
        let d2 =
            sd * ((m1 + m2) * (g * x1.cos() + l1 * x2 * x2) + l2 * m2 * x4 * x4 * cd) / (l2 * den);
        (d1, d2)
    }

    /// `ẋ = (x₂, β₁, x₄, β₂)`.
    pub fn dynamics(&self, x: &[f64], u: f64) -> Vec<f64> {
        let (d1, d2) = self.drift(x);
        vec![x[1], d1 + self.alpha * u * u * u, x[3], d2 + u]
    }

    /// Total mechanical energy.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let &Self {
            m1, m2, l1, l2, g, ..
        } = self;
        let (phi, dphi, psi, dpsi) = (x[0], x[1], x[2], x[3]);
        0.5 * (m1 + m2) * l1 * l1 * dphi * dphi
            + 0.5 * m2 * l2 * l2 * dpsi * dpsi
            + m2 * l1 * l2 * dphi * dpsi * (phi - psi).cos()
            - (m1 + m2) * g * l1 * phi.cos()
            - m2 * g * l2 * psi.cos()
    }
}

pub fn to_z(x: &[f64]) -> Vec<f64> {
    vec![x[0] - x[2], x[1] - x[3], x[2], x[3]]
}

pub fn from_z(z: &[f64]) -> Vec<f64> {
    vec![z[0] + z[2], z[1] + z[3], z[2], z[3]]
}

/// `(H₁, H₂)`, the accelerations of `z₂ = φ̇ − ψ̇` and `z₄ = ψ̇`.
pub fn pendulum_h(p: &PendulumParams, z: &[f64], u: f64) -> [f64; 2] {
    let (d1, d2) = p.drift(&from_z(z));
    [d1 - d2 + p.alpha * u * u * u - u, d2 + u]
}

/// `H₁(z, 0)`, the part of `H₁` free of the control.
fn h1_drift(p: &PendulumParams, z: &[f64]) -> f64 {
    let (d1, d2) = p.drift(&from_z(z));
    d1 - d2
}

/// Which control of a pair: `Plus` pushes the block's velocity up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Step-1 control solving `H₁(z, u) = ε₁⁺` (`Plus`) or `H₁ = −ε₁⁻`
/// (`Minus`): the largest positive root, or the most negative one.
pub fn pendulum_u1pm(p: &PendulumParams, z: &[f64], side: Side) -> Result<f64> {
    let g = h1_drift(p, z);
    let constant = match side {
        Side::Plus => g - p.eps1p,
        Side::Minus => g + p.eps1m,
    };
    let roots = cubic_roots(p.alpha, 0.0, -1.0, constant);
    let pick = match side {
        Side::Plus => roots.last().copied().filter(|&r| r > 0.0),
        Side::Minus => roots.first().copied().filter(|&r| r < 0.0),
    };
    pick.ok_or(Error::NoRealRoot { constant })
}

/// Step-1 switching curve `z₂ = w₁(z₁)`.
pub fn pendulum_w1(p: &PendulumParams, z1: f64) -> f64 {
    if z1 >= 0.0 {
        -(2.0 * p.eps1p * z1).sqrt()
    } else {
        (-2.0 * p.eps1m * z1).sqrt()
    }
}

/// Maximal (`Plus`) or minimal (`Minus`) root of `αu³ − u − (g/l₁) sin z₃ = 0`.
pub fn pendulum_u2pm(p: &PendulumParams, z3: f64, side: Side) -> f64 {
    let roots = cubic_roots(p.alpha, 0.0, -1.0, -p.g / p.l1 * z3.sin());
    match side {
        Side::Plus => *roots.last().expect("a cubic has a real root"),
        Side::Minus => roots[0],
    }
}

/// Step-2 switching curve `z₄ = w₂(z₃)`.
pub fn pendulum_w2(p: &PendulumParams, z3: f64) -> f64 {
    if z3 >= 0.0 {
        let i = integrate(|s| pendulum_u2pm(p, s, Side::Plus), 0.0, z3, W2_TOL);
        -(2.0 * i).sqrt()
    } else {
        let i = integrate(|s| pendulum_u2pm(p, s, Side::Minus), z3, 0.0, W2_TOL);
        (-2.0 * i).sqrt()
    }
}

/// Step-2 margins `(ε₂⁺, ε₂⁻)`: `ε₂⁺ = u₂⁺(−π/2)` and `ε₂⁻` the distance of
/// the largest sampled `u₂⁻` from zero, so that `H₂ ≥ ε₂⁺` under `u₂⁺` and
/// `H₂ ≤ −ε₂⁻` under `u₂⁻` on the aligned plane.
pub fn pendulum_eps2(p: &PendulumParams) -> (f64, f64) {
    let plus = pendulum_u2pm(p, -FRAC_PI_2, Side::Plus);
    let sup_minus = (0..=720)
        .map(|k| pendulum_u2pm(p, -PI + k as f64 * PI / 360.0, Side::Minus))
        .fold(f64::NEG_INFINITY, f64::max);
    (plus, -sup_minus)
}

/// Closed-form step-1 times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PendulumT1 {
    /// Time of the switch onto the curve (zero if starting on it).
    pub t11: f64,
    /// Time along the curve into the origin.
    pub t12: f64,
    pub t1: f64,
}

/// Step-1 times from `z₀`: one bang arc to the curve `w₁`, then along it.
pub fn pendulum_t1_analytic(p: &PendulumParams, z0: &[f64]) -> PendulumT1 {
    let (ep, em) = (p.eps1p, p.eps1m);
    let (z1, z2) = (z0[0], z0[1]);
    let w = pendulum_w1(p, z1);
    let on_curve = (z2 - w).abs() <= 1e-12 * (1.0 + w.abs());
    if on_curve {
        // Single arc: u⁺ along the z₁ ≥ 0 branch, u⁻ along the other.
        let t = if z1 >= 0.0 { -z2 / ep } else { z2 / em };
        return PendulumT1 {
            t11: 0.0,
            t12: t,
            t1: t,
        };
    }
    if z2 < w {
        let q = z2 * z2 - 2.0 * z1 * ep;
        let t11 = (-z2 + (q * em / (ep + em)).sqrt()) / ep;
        let t12 = (q / (em * (ep + em))).sqrt();
        PendulumT1 {
            t11,
            t12,
            t1: t11 + t12,
        }
    } else {
        let q = z2 * z2 + 2.0 * z1 * em;
        let t11 = (z2 + (q * ep / (ep + em)).sqrt()) / em;
        let t12 = (q / (ep * (ep + em))).sqrt();
        PendulumT1 {
            t11,
            t12,
            t1: t11 + t12,
        }
    }
}

pub fn pendulum(p: PendulumParams) -> Result<Scenario> {
    p.validate()?;
    let u1p: ControlLaw = Arc::new(move |z: &[f64]| pendulum_u1pm(&p, z, Side::Plus));
    let u1m: ControlLaw = Arc::new(move |z: &[f64]| pendulum_u1pm(&p, z, Side::Minus));
    let w1: CurveResidual = Arc::new(move |pos: f64, vel: f64| Ok(vel - pendulum_w1(&p, pos)));
    let u2p: ControlLaw = Arc::new(move |z: &[f64]| Ok(pendulum_u2pm(&p, z[2], Side::Plus)));
    let u2m: ControlLaw = Arc::new(move |z: &[f64]| Ok(pendulum_u2pm(&p, z[2], Side::Minus)));
    let w2: CurveResidual = Arc::new(move |pos: f64, vel: f64| Ok(vel - pendulum_w2(&p, pos)));

    let params: BTreeMap<String, f64> = [
        ("m1", p.m1),
        ("m2", p.m2),
        ("l1", p.l1),
        ("l2", p.l2),
        ("g", p.g),
        ("alpha", p.alpha),
        ("eps1p", p.eps1p),
        ("eps1m", p.eps1m),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();

    Ok(Scenario {
        name: "pendulum".into(),
        n: 4,
        dynamics: Arc::new(move |x: &[f64], u: f64| p.dynamics(x, u)),
        to_z: Arc::new(to_z),
        from_z: Arc::new(from_z),
        system: BlockSystem::new(
            BlockPartition::new(vec![2, 2])?,
            Arc::new(move |z: &[f64], u: f64| pendulum_h(&p, z, u).to_vec()),
        ),
        policies: vec![
            StepPolicy::CurveSwitch(CurveSwitch::new(w1, u1p, u1m)),
            StepPolicy::CurveSwitch(CurveSwitch::new(w2, u2p, u2m)),
        ],
        params,
        analytic_schedule: Some(Arc::new(move |z: &[f64]| {
            Ok(vec![pendulum_t1_analytic(&p, z).t1])
        })),
        probe: ProbeFields {
            a: VectorField::new(4, |x| vec![x[1], 0.0, x[3], 0.0]),
            bs: vec![VectorField::unit(4, 1), VectorField::unit(4, 3)],
            phi_grads: vec![
                const_gradient(vec![1.0, 0.0, -1.0, 0.0]),
                const_gradient(vec![0.0, 0.0, 1.0, 0.0]),
            ],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p() -> PendulumParams {
        PendulumParams::default()
    }

    #[test]
    fn residual_on_aligned_plane() {
        let p = p();
        assert_eq!(pendulum_h(&p, &[0.0; 4], 0.0), [0.0, 0.0]);
        for (z3, z4, u) in [(0.3, -1.0, 2.0), (-1.2, 0.4, -0.7)] {
            let h = pendulum_h(&p, &[0.0, 0.0, z3, z4], u);
            assert_abs_diff_eq!(h[0], p.alpha * u * u * u - u - z3.sin(), epsilon = 1e-14);
            assert_abs_diff_eq!(h[1], u, epsilon = 1e-14);
        }
    }

    #[test]
    fn step_one_roots() {
        let p = p();
        let up = pendulum_u1pm(&p, &[0.0; 4], Side::Plus).unwrap();
        let um = pendulum_u1pm(&p, &[0.0; 4], Side::Minus).unwrap();
        // Real roots of u³/9 − u − 20 = 0 and u³/9 − u + 10 = 0.
        assert_abs_diff_eq!(up, 6.176_123_115_575_65, epsilon = 1e-10);
        assert_abs_diff_eq!(um, -5.146_584_047_301, epsilon = 1e-10);
        let z = [-0.3, 0.8, 0.4, -0.2];
        let hp = pendulum_h(&p, &z, pendulum_u1pm(&p, &z, Side::Plus).unwrap())[0];
        let hm = pendulum_h(&p, &z, pendulum_u1pm(&p, &z, Side::Minus).unwrap())[0];
        assert_abs_diff_eq!(hp, 20.0, epsilon = 1e-10);
        assert_abs_diff_eq!(hm, -10.0, epsilon = 1e-10);
    }

    #[test]
    fn no_root_of_requested_sign() {
        // A negative margin makes the constant term large and positive, so
        // the only real root is negative.
        let q = PendulumParams { eps1p: -1e6, ..p() };
        assert!(matches!(
            pendulum_u1pm(&q, &[0.0; 4], Side::Plus),
            Err(Error::NoRealRoot { .. })
        ));
    }

    #[test]
    fn first_curve() {
        let p = p();
        assert_eq!(pendulum_w1(&p, 0.0), 0.0);
        assert_abs_diff_eq!(pendulum_w1(&p, 0.1), -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pendulum_w1(&p, -1.0), 20f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn step_two_roots() {
        let p = p();
        assert_abs_diff_eq!(pendulum_u2pm(&p, 0.0, Side::Plus), 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(pendulum_u2pm(&p, 0.0, Side::Minus), -3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(
            pendulum_u2pm(&p, -FRAC_PI_2, Side::Plus),
            2.226_681_596_9,
            epsilon = 1e-9
        );
        for k in 0..=100 {
            let z3 = -PI + 2.0 * PI * k as f64 / 100.0;
            assert!(pendulum_u2pm(&p, z3, Side::Plus) > 0.0);
            assert!(pendulum_u2pm(&p, z3, Side::Minus) < 0.0);
        }
        // At the admissible bound the positive root at π/2 is the double
        // root 3 (α₀ = β₀ = 3/2).
        let q = PendulumParams {
            alpha: 4.0 / 27.0,
            ..p
        };
        assert_abs_diff_eq!(
            pendulum_u2pm(&q, FRAC_PI_2, Side::Plus),
            3.0,
            epsilon = 1e-6
        );
    }

    #[test]
    fn second_curve_against_simpson() {
        let p = p();
        assert_eq!(pendulum_w2(&p, 0.0), 0.0);
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
            let n = 2000;
            let h = (b - a) / n as f64;
            (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    w * f(a + i as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        let mut prev = 0.0;
        for k in 1..=5 {
            let z3 = 0.4 * k as f64;
            let want = -(2.0 * simpson(&|s| pendulum_u2pm(&p, s, Side::Plus), 0.0, z3)).sqrt();
            let got = pendulum_w2(&p, z3);
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
            assert!(got < prev);
            prev = got;
            let want = (-2.0 * simpson(&|s| pendulum_u2pm(&p, s, Side::Minus), -z3, 0.0)).sqrt();
            assert_abs_diff_eq!(pendulum_w2(&p, -z3), want, epsilon = 1e-8);
        }
    }

    #[test]
    fn step_two_margins_are_positive() {
        let (ep, em) = pendulum_eps2(&p());
        assert_abs_diff_eq!(
            ep,
            pendulum_u2pm(&p(), -FRAC_PI_2, Side::Plus),
            epsilon = 0.0
        );
        assert!(ep > 0.0 && em > 0.0);
        assert_abs_diff_eq!(
            em,
            -pendulum_u2pm(&p(), FRAC_PI_2, Side::Minus),
            epsilon = 1e-12
        );
    }

    #[test]
    fn analytic_step_one_times() {
        let p = p();
        let z0 = to_z(&[-2.0, 1.0, -1.0, 0.5]);
        assert_eq!(z0, vec![-1.0, 0.5, -1.0, 0.5]);
        let t = pendulum_t1_analytic(&p, &z0);
        assert_abs_diff_eq!(t.t11, 0.15814, epsilon = 5e-5);
        assert_abs_diff_eq!(t.t1, 0.52443, epsilon = 5e-5);
        assert_eq!(pendulum_t1_analytic(&p, &[0.0; 4]).t1, 0.0);
        let on = [0.2, pendulum_w1(&p, 0.2), 0.0, 0.0];
        let t = pendulum_t1_analytic(&p, &on);
        assert_eq!(t.t11, 0.0);
        assert_abs_diff_eq!(
            t.t1,
            0.2f64.sqrt() * (2.0f64 / 20.0).sqrt() * 1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn parameter_validation() {
        assert!(p().validate().is_ok());
        assert!(PendulumParams { alpha: 0.2, ..p() }.validate().is_err());
        assert!(PendulumParams { m1: 0.0, ..p() }.validate().is_err());
    }
}
