//! `ẏ₁ = sin u, ẏ₂ = u cos 2u`: not controllable to first order, but two
//! constant-magnitude steps reach the origin.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use super::{const_gradient, ProbeFields, Scenario};
use crate::mappability::VectorField;
use crate::stepwise::{BlockPartition, BlockSystem, ConstSign, StepPolicy};

fn rhs(_: &[f64], u: f64) -> Vec<f64> {
    vec![u.sin(), u * (2.0 * u).cos()]
}

/// `T_1 = |y₁₀|`, `T_2 = T_1 + |y₁₀/2 + y₂₀/π|`.
pub fn intro2d_schedule(y0: &[f64]) -> Vec<f64> {
    let t1 = y0[0].abs();
    vec![t1, t1 + (y0[0] / 2.0 + y0[1] / PI).abs()]
}

pub fn intro2d() -> Scenario {
    let id: super::StateMap = Arc::new(|x: &[f64]| x.to_vec());
    let partition = BlockPartition::new(vec![1, 1]).expect("static partition");
    Scenario {
        name: "intro2d".into(),
        n: 2,
        dynamics: Arc::new(rhs),
        to_z: id.clone(),
        from_z: id,
        system: BlockSystem::new(partition, Arc::new(rhs)),
        policies: vec![
            StepPolicy::ConstSign(ConstSign::symmetric(FRAC_PI_2)),
            StepPolicy::ConstSign(ConstSign::symmetric(PI)),
        ],
        params: BTreeMap::new(),
        analytic_schedule: Some(Arc::new(|z: &[f64]| Ok(intro2d_schedule(z)))),
        probe: ProbeFields {
            a: VectorField::zero(2),
            bs: vec![VectorField::unit(2, 0), VectorField::unit(2, 1)],
            phi_grads: vec![
                const_gradient(vec![1.0, 0.0]),
                const_gradient(vec![0.0, 1.0]),
            ],
        },
    }
}
