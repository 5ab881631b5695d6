//! Bundled systems: original dynamics, block change of variables, residual
//! dynamics and per-step policies.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mappability::{Gradient, VectorField};
use crate::stepwise::{BlockPartition, BlockSystem, StepPolicy};

pub mod example51;
pub mod intro2d;
pub mod pendulum;
pub mod polyodd;
pub mod staircase;

pub use example51::{example51, example51_with, Example51Functions};
pub use intro2d::intro2d;
pub use pendulum::{pendulum, PendulumParams};
pub use polyodd::{polyodd, polyodd_coeffs, PolyOddOptions};
pub use staircase::staircase;

/// `x ↦ y` map between charts.
pub type StateMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// `(x, u) ↦ ẋ`.
pub type Dynamics = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;
/// `z_0 ↦ (T_1, T_2, …)`; may stop short of `T_m` when later steps have
/// no closed form.
pub type Schedule = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// Registry names; `polyodd:<n>` takes the dimension as a suffix.
pub const SCENARIO_NAMES: [&str; 4] = ["intro2d", "example51", "polyodd:<n>", "pendulum"];

/// Drift, input fields and the functions `φ_i` generating the change of
/// variables, for the reducibility probe.
#[derive(Clone)]
pub struct ProbeFields {
    pub a: VectorField,
    pub bs: Vec<VectorField>,
    pub phi_grads: Vec<Gradient>,
}

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub dynamics: Dynamics,
    pub to_z: StateMap,
    pub from_z: StateMap,
    pub system: BlockSystem,
    pub policies: Vec<StepPolicy>,
    /// Resolved parameter values, defaults included.
    pub params: BTreeMap<String, f64>,
    pub analytic_schedule: Option<Schedule>,
    pub probe: ProbeFields,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("blocks", self.system.partition())
            .field("policies", &self.policies)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn blocks(&self) -> &BlockPartition {
        self.system.partition()
    }

    /// Analytic step times from an initial state in original coordinates.
    pub fn schedule(&self, x0: &[f64]) -> Option<Result<Vec<f64>>> {
        self.analytic_schedule.as_ref().map(|s| s(&(self.to_z)(x0)))
    }
}

/// Merge user parameters over defaults, rejecting unknown keys.
pub(crate) fn resolve_params(
    scenario: &str,
    defaults: &[(&str, f64)],
    given: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, f64> =
        defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in given {
        if !out.contains_key(k) {
            let known: Vec<_> = defaults.iter().map(|(k, _)| *k).collect();
            return Err(Error::InvalidArgument(format!(
                "scenario {scenario} has no parameter `{k}` (known: {})",
                if known.is_empty() {
                    "none".to_string()
                } else {
                    known.join(", ")
                }
            )));
        }
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "parameter `{k}` must be finite, got {v}"
            )));
        }
        out.insert(k.clone(), *v);
    }
    Ok(out)
}

/// Build a registered scenario by name.
pub fn lookup(name: &str, params: &BTreeMap<String, f64>) -> Result<Scenario> {
    match name {
        "intro2d" => {
            resolve_params(name, &[], params)?;
            Ok(intro2d())
        }
        "example51" => {
            let p = resolve_params(name, &[("eps1", example51::DEFAULT_EPS1)], params)?;
            example51_with(Example51Functions::default(), p["eps1"])
        }
        "pendulum" => {
            let d = PendulumParams::default();
            let p = resolve_params(
                name,
                &[
                    ("m1", d.m1),
                    ("m2", d.m2),
                    ("l1", d.l1),
                    ("l2", d.l2),
                    ("g", d.g),
                    ("alpha", d.alpha),
                    ("eps1p", d.eps1p),
                    ("eps1m", d.eps1m),
                ],
                params,
            )?;
            pendulum(PendulumParams {
                m1: p["m1"],
                m2: p["m2"],
                l1: p["l1"],
                l2: p["l2"],
                g: p["g"],
                alpha: p["alpha"],
                eps1p: p["eps1p"],
                eps1m: p["eps1m"],
            })
        }
        _ => {
            if let Some(rest) = name.strip_prefix("polyodd:") {
                let n: usize = rest.parse().map_err(|_| {
                    Error::UnknownScenario(format!("{name} (dimension must be an integer)"))
                })?;
                polyodd(n, &PolyOddOptions::from_params(n, params)?)
            } else {
                Err(Error::UnknownScenario(name.to_string()))
            }
        }
    }
}

/// Constant gradient field.
pub(crate) fn const_gradient(g: Vec<f64>) -> Gradient {
    Arc::new(move |_: &[f64]| g.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_resolve() {
        let empty = BTreeMap::new();
        for name in ["intro2d", "example51", "polyodd:3", "polyodd:5", "pendulum"] {
            let s = lookup(name, &empty).unwrap();
            assert_eq!(s.name, name);
        }
        assert!(matches!(
            lookup("polyodd:x", &empty),
            Err(Error::UnknownScenario(_))
        ));
        assert!(matches!(
            lookup("nope", &empty),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn unknown_parameter_rejected() {
        let mut p = BTreeMap::new();
        p.insert("mass".to_string(), 2.0);
        let err = lookup("pendulum", &p).unwrap_err();
        assert!(err.is_validation());
        let mut p = BTreeMap::new();
        p.insert("alpha".to_string(), 0.1);
        assert_eq!(lookup("pendulum", &p).unwrap().params["alpha"], 0.1);
    }
}
