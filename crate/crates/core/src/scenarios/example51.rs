//! Cubic-control system
//! `ẋ₁ = u³ + 0.1 sin² f₁(x, u), ẋ₂ = u, ẋ₃ = f₂(x₂)`.
//!
//! In `z = (x₁ − x₂, x₃, f₂(x₂))` it becomes `ż₁ = H₁`, `ż₂ = z₃`,
//! `ż₃ = f̃₂(z₃) u` with blocks of sizes 1 and 2. Step 1 is Θ-feedback on
//! `z₁` with margin `ε₁`; step 2 switches on the curve of trajectories
//! entering the origin of the `(z₂, z₃)` plane, using the roots of
//! `H₁ = 0` so that `z₁` stays frozen.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{const_gradient, ProbeFields, Scenario};
use crate::ctrl_fn::LinearSynth;
use crate::error::{Error, Result};
use crate::gramian::GramSet;
use crate::mappability::VectorField;
use crate::numerics::bracketed_root;
use crate::stepwise::{
    BlockPartition, BlockSystem, ControlLaw, CurveResidual, CurveSwitch, StepPolicy, ThetaSwitch,
};

pub const DEFAULT_EPS1: f64 = 0.2;
/// Largest `|v|` for which `u³ − u + 0.1 sin²(·) = v` keeps three real
/// roots on `[−2, 2]`.
pub fn eps1_limit() -> f64 {
    2.0 / (3.0 * 3f64.sqrt()) - 0.1
}

const STEP1_PLUS: (f64, f64) = (0.7, 1.1);
const STEP1_MINUS: (f64, f64) = (-1.2, -0.8);
const STEP2_POS: (f64, f64) = (0.9, 1.0);
const STEP2_NEG: (f64, f64) = (-1.1, -1.0);
const ROOT_TOL: f64 = 1e-15;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The free functions of the system. `f2` must be strictly monotone with
/// `|f₂′| ≥ δ > 0` and `f₂(0) = 0`; `f1(0, 0, 0, 0) = 0`.
#[derive(Clone)]
pub struct Example51Functions {
    pub f1: Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>,
    pub f2: Scalar,
    pub f2_prime: Scalar,
    pub f2_inv: Scalar,
    /// Closed form `z₂ = G(z₃)` of the switching curve, if known. Otherwise
    /// the curve is integrated numerically on `[−curve_range, curve_range]`.
    pub curve: Option<Scalar>,
    pub curve_range: f64,
}

impl Default for Example51Functions {
    /// `f₁ ≡ 0`, `f₂(x₂) = x₂`: the switching curve is `z₂ = −z₃|z₃|/2`.
    fn default() -> Self {
        Self {
            f1: Arc::new(|_, _, _, _| 0.0),
            f2: Arc::new(|x| x),
            f2_prime: Arc::new(|_| 1.0),
            f2_inv: Arc::new(|z| z),
            curve: Some(Arc::new(|v| -v * v.abs() / 2.0)),
            curve_range: 4.0,
        }
    }
}

/// Residual dynamics in the block chart.
#[derive(Clone)]
struct Model {
    fns: Example51Functions,
}

impl Model {
    fn f1_tilde(&self, z: &[f64], u: f64) -> f64 {
        let x2 = (self.fns.f2_inv)(z[2]);
        (self.fns.f1)(z[0] + x2, x2, z[1], u)
    }

    fn f2_tilde(&self, z3: f64) -> f64 {
        (self.fns.f2_prime)((self.fns.f2_inv)(z3))
    }

    fn h1(&self, z: &[f64], u: f64) -> f64 {
        u * u * u - u + 0.1 * self.f1_tilde(z, u).sin().powi(2)
    }

    fn residual(&self, z: &[f64], u: f64) -> Vec<f64> {
        vec![self.h1(z, u), self.f2_tilde(z[2]) * u]
    }

    /// Root of `H₁(z, u) = v` inside `bracket`.
    fn solve(&self, z: &[f64], v: f64, bracket: (f64, f64)) -> Result<f64> {
        bracketed_root(|u| self.h1(z, u) - v, bracket.0, bracket.1, ROOT_TOL)
    }

    /// Step-2 controls on `z₁ = 0`; `plus` gives the one with `H₂ > 0`.
    fn u2(&self, z2: f64, z3: f64, plus: bool) -> Result<f64> {
        let z = [0.0, z2, z3];
        let positive_gain = self.f2_tilde(z3) > 0.0;
        let bracket = if plus == positive_gain {
            STEP2_POS
        } else {
            STEP2_NEG
        };
        self.solve(&z, 0.0, bracket)
    }

    fn dynamics(&self, x: &[f64], u: f64) -> Vec<f64> {
        vec![
            u * u * u + 0.1 * (self.fns.f1)(x[0], x[1], x[2], u).sin().powi(2),
            u,
            (self.fns.f2)(x[1]),
        ]
    }
}

/// Curve `z₂ = G(z₃)` tabulated by RK4 from the origin, interpolated by
/// cubic Hermite segments.
struct CurveTable {
    v0: f64,
    h: f64,
    g: Vec<f64>,
    dg: Vec<f64>,
}

impl CurveTable {
    fn build(model: &Model, range: f64, nodes_per_side: usize) -> Result<Self> {
        // dz₂/dz₃ = z₃ / (f̃₂(z₃) u), with u⁺ below the origin and u⁻ above.
        let slope = |z2: f64, z3: f64| -> Result<f64> {
            if z3 == 0.0 {
                return Ok(0.0);
            }
            let u = model.u2(z2, z3, z3 < 0.0)?;
            Ok(z3 / (model.f2_tilde(z3) * u))
        };
        let h = range / nodes_per_side as f64;
        let total = 2 * nodes_per_side + 1;
        let mut g = vec![0.0; total];
        let mut dg = vec![0.0; total];
        let mid = nodes_per_side;
        for dir in [1.0f64, -1.0] {
            let mut z2 = 0.0;
            for s in 0..nodes_per_side {
                let v = dir * s as f64 * h;
                let step = dir * h;
                let k1 = slope(z2, v)?;
                let k2 = slope(z2 + 0.5 * step * k1, v + 0.5 * step)?;
                let k3 = slope(z2 + 0.5 * step * k2, v + 0.5 * step)?;
                let k4 = slope(z2 + step * k3, v + step)?;
                z2 += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                let idx = if dir > 0.0 { mid + s + 1 } else { mid - s - 1 };
                g[idx] = z2;
                dg[idx] = slope(z2, v + step)?;
            }
        }
        Ok(Self {
            v0: -range,
            h,
            g,
            dg,
        })
    }

    fn eval(&self, v: f64) -> Result<f64> {
        let s = (v - self.v0) / self.h;
        let last = self.g.len() - 1;
        if !(s >= 0.0 && s <= last as f64) {
            return Err(Error::DomainError(format!(
                "z3 = {v} outside the tabulated switching curve range ±{}",
                -self.v0
            )));
        }
        let i = (s.floor() as usize).min(last - 1);
        let t = s - i as f64;
        let (p0, p1) = (self.g[i], self.g[i + 1]);
        let (m0, m1) = (self.dg[i] * self.h, self.dg[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1)
    }
}

/// The system with `f₁ ≡ 0`, `f₂(x₂) = x₂` and `ε₁ = 0.2`.
pub fn example51() -> Scenario {
    example51_with(Example51Functions::default(), DEFAULT_EPS1)
        .expect("default functions are admissible")
}

pub fn example51_with(fns: Example51Functions, eps1: f64) -> Result<Scenario> {
    if !(eps1 > 0.0 && eps1 <= eps1_limit()) {
        return Err(Error::InvalidArgument(format!(
            "eps1 must lie in (0, {:.6}], got {eps1}",
            eps1_limit()
        )));
    }
    if (fns.f2)(0.0) != 0.0 || (fns.f1)(0.0, 0.0, 0.0, 0.0) != 0.0 {
        return Err(Error::InvalidArgument(
            "f2(0) and f1(0, 0, 0, 0) must vanish".into(),
        ));
    }
    let model = Model { fns: fns.clone() };

    let synth = LinearSynth::with_max_a0(GramSet::new(1)?, eps1)?;
    let (m, e) = (model.clone(), eps1);
    let u1p: ControlLaw = Arc::new(move |z: &[f64]| m.solve(z, e, STEP1_PLUS));
    let m = model.clone();
    let u1m: ControlLaw = Arc::new(move |z: &[f64]| m.solve(z, -e, STEP1_MINUS));
    let step1 = ThetaSwitch::new(synth, u1p, u1m);

    let m = model.clone();
    let u2p: ControlLaw = Arc::new(move |z: &[f64]| m.u2(z[1], z[2], true));
    let m = model.clone();
    let u2m: ControlLaw = Arc::new(move |z: &[f64]| m.u2(z[1], z[2], false));
    let curve: CurveResidual = match fns.curve.clone() {
        Some(g) => Arc::new(move |pos: f64, vel: f64| Ok(pos - g(vel))),
        None => {
            let table = CurveTable::build(&model, fns.curve_range, 4000)?;
            Arc::new(move |pos: f64, vel: f64| Ok(pos - table.eval(vel)?))
        }
    };
    let step2 = CurveSwitch::new(curve, u2p, u2m);

    let f = fns.clone();
    let to_z = move |x: &[f64]| vec![x[0] - x[1], x[2], (f.f2)(x[1])];
    let f = fns.clone();
    let from_z = move |z: &[f64]| {
        let x2 = (f.f2_inv)(z[2]);
        vec![z[0] + x2, x2, z[1]]
    };
    let m = model.clone();
    let residual = move |z: &[f64], u: f64| m.residual(z, u);
    let m = model.clone();
    let dynamics = move |x: &[f64], u: f64| m.dynamics(x, u);
    let f2 = fns.f2.clone();
    let drift = VectorField::new(3, move |x| vec![0.0, 0.0, f2(x[1])]);

    let mut params = BTreeMap::new();
    params.insert("eps1".into(), eps1);
    Ok(Scenario {
        name: "example51".into(),
        n: 3,
        dynamics: Arc::new(dynamics),
        to_z: Arc::new(to_z),
        from_z: Arc::new(from_z),
        system: BlockSystem::new(BlockPartition::new(vec![1, 2])?, Arc::new(residual)),
        policies: vec![
            StepPolicy::ThetaSwitch(step1),
            StepPolicy::CurveSwitch(step2),
        ],
        params,
        analytic_schedule: Some(Arc::new(move |z: &[f64]| Ok(vec![z[0].abs() / eps1]))),
        probe: ProbeFields {
            a: drift,
            bs: vec![VectorField::unit(3, 0), VectorField::unit(3, 1)],
            phi_grads: vec![
                const_gradient(vec![1.0, -1.0, 0.0]),
                const_gradient(vec![0.0, 0.0, 1.0]),
            ],
        },
    })
}
