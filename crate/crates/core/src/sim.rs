//! Fixed-step integration of switched closed loops.
//!
//! The integrator is classical RK4 with the active control branch frozen
//! inside each step. Branch changes and block arrivals are located inside a
//! step (bisection and golden-section search respectively) and the step is
//! split there, so discontinuities never sit inside an RK4 stage.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenarios::Scenario;
use crate::stepwise::{orchestrate, BlockSystem, StepRecord, StepwiseRun};

/// Which coordinates the integrator carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    /// Integrate the block form and map back through `from_z` for reporting.
    #[default]
    Z,
    /// Integrate the original dynamics; switching functions use `to_z(x)`.
    X,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// Time resolution of switch and arrival localization.
    pub event_tol: f64,
    /// Ratio between the exit and entry thresholds of the sliding band.
    pub hysteresis: f64,
    pub t_max: f64,
    /// Per-block sup-norm threshold `δ` that ends a step.
    pub done_tol: f64,
    /// Pinned blocks may drift to `hold_factor * δ` before the run aborts.
    pub hold_factor: f64,
    pub chart: Chart,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            event_tol: 1e-10,
            hysteresis: 2.0,
            t_max: 100.0,
            done_tol: 1e-8,
            hold_factor: 10.0,
            chart: Chart::Z,
        }
    }
}

impl IntegratorConfig {
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_done_tol(mut self, done_tol: f64) -> Self {
        self.done_tol = done_tol;
        self
    }

    pub fn with_chart(mut self, chart: Chart) -> Self {
        self.chart = chart;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("dt", self.dt)?;
        positive("event_tol", self.event_tol)?;
        positive("t_max", self.t_max)?;
        positive("done_tol", self.done_tol)?;
        if self.event_tol >= self.dt {
            return Err(Error::InvalidArgument(format!(
                "event_tol ({}) must be smaller than dt ({})",
                self.event_tol, self.dt
            )));
        }
        if !(self.hysteresis >= 1.0 && self.hysteresis.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "hysteresis factor must be at least 1, got {}",
                self.hysteresis
            )));
        }
        if !(self.hold_factor >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "hold_factor must be at least 1, got {}",
                self.hold_factor
            )));
        }
        Ok(())
    }
}

/// A state space the engine can integrate in.
pub trait Plant {
    fn dim(&self) -> usize;
    fn rhs(&self, y: &[f64], u: f64) -> Vec<f64>;
    /// Block-form coordinates of the integrated state.
    fn z_of(&self, y: &[f64]) -> Vec<f64>;
    /// Original coordinates of the integrated state.
    fn x_of(&self, y: &[f64]) -> Vec<f64>;
}

/// Integrates the block form directly.
pub struct ZChart<'a> {
    pub system: &'a BlockSystem,
    pub from_z: &'a (dyn Fn(&[f64]) -> Vec<f64> + Send + Sync),
}

impl Plant for ZChart<'_> {
    fn dim(&self) -> usize {
        self.system.partition().n()
    }

    fn rhs(&self, y: &[f64], u: f64) -> Vec<f64> {
        self.system.rhs(y, u)
    }

    fn z_of(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }

    fn x_of(&self, y: &[f64]) -> Vec<f64> {
        (self.from_z)(y)
    }
}

/// Integrates the original dynamics `ẋ = f(x, u)`.
pub struct XChart<'a> {
    pub n: usize,
    pub dynamics: &'a (dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync),
    pub to_z: &'a (dyn Fn(&[f64]) -> Vec<f64> + Send + Sync),
}

impl Plant for XChart<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn rhs(&self, y: &[f64], u: f64) -> Vec<f64> {
        (self.dynamics)(y, u)
    }

    fn z_of(&self, y: &[f64]) -> Vec<f64> {
        (self.to_z)(y)
    }

    fn x_of(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
}

/// One classical Runge-Kutta step of size `h`.
pub fn rk4_step<F>(mut f: F, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = y.len();
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { (0..n).map(|i| y[i] + a * k[i]).collect() };
    let k1 = f(y)?;
    let k2 = f(&axpy(0.5 * h, &k1))?;
    let k3 = f(&axpy(0.5 * h, &k2))?;
    let k4 = f(&axpy(h, &k3))?;
    Ok((0..n)
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    BranchSwitch,
    StepComplete,
    SurfaceSlide,
}

impl EventKind {
    /// Integer code used in the CSV `event` column (0 means no event).
    pub fn code(self) -> u8 {
        match self {
            EventKind::BranchSwitch => 1,
            EventKind::StepComplete => 2,
            EventKind::SurfaceSlide => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    /// One-based step index.
    pub step: usize,
    pub detail: String,
}

/// Sampled run in both charts plus the event log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    pub zs: Vec<Vec<f64>>,
    pub controls: Vec<f64>,
    /// Event code of each sample, see [`EventKind::code`].
    pub flags: Vec<u8>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State dimension, zero for an empty trajectory.
    pub fn dim(&self) -> usize {
        self.xs.first().map_or(0, Vec::len)
    }

    pub(crate) fn push(&mut self, t: f64, x: Vec<f64>, z: Vec<f64>, u: f64, flag: u8) {
        self.times.push(t);
        self.xs.push(x);
        self.zs.push(z);
        self.controls.push(u);
        self.flags.push(flag);
    }

    /// Raise the flag of the last sample if `kind` outranks it.
    pub(crate) fn mark_last(&mut self, kind: EventKind) {
        let rank = |c: u8| match c {
            2 => 3,
            3 => 2,
            1 => 1,
            _ => 0,
        };
        if let Some(f) = self.flags.last_mut() {
            if rank(kind.code()) > rank(*f) {
                *f = kind.code();
            }
        }
    }

    /// Time of the `k`-th event of the given kind within one step.
    pub fn event_times(&self, kind: EventKind, step: usize) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.kind == kind && e.step == step)
            .map(|e| e.t)
            .collect()
    }
}

/// Serialized run summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub x0: Vec<f64>,
    pub params: BTreeMap<String, f64>,
    pub steps: Vec<StepRecord>,
    #[serde(rename = "T_total")]
    pub t_total: f64,
    pub step_times: Vec<f64>,
    pub hold_residuals: Vec<f64>,
    /// Euclidean norm of the final state in the original coordinates.
    pub final_state_norm: f64,
}

impl RunSummary {
    pub fn from_run(scenario: &Scenario, x0: &[f64], run: &StepwiseRun, traj: &Trajectory) -> Self {
        let final_state_norm = traj
            .xs
            .last()
            .map_or(0.0, |x| x.iter().map(|v| v * v).sum::<f64>().sqrt());
        Self {
            schema_version: 1,
            scenario: scenario.name.clone(),
            x0: x0.to_vec(),
            params: scenario.params.clone(),
            steps: run.records(),
            t_total: run.total_time(),
            step_times: run.step_times.clone(),
            hold_residuals: run.hold_residuals.clone(),
            final_state_norm,
        }
    }
}

/// Run a scenario from `x0` (original coordinates) to the origin.
pub fn simulate(
    scn: &Scenario,
    x0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, RunSummary)> {
    let (run, traj) = simulate_run(scn, x0, cfg)?;
    let summary = RunSummary::from_run(scn, x0, &run, &traj);
    Ok((traj, summary))
}

/// Like [`simulate`] but returns the raw stepwise record.
pub fn simulate_run(
    scn: &Scenario,
    x0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(StepwiseRun, Trajectory)> {
    if x0.len() != scn.n {
        return Err(Error::InvalidArgument(format!(
            "scenario {} has dimension {} but x0 has {} entries",
            scn.name,
            scn.n,
            x0.len()
        )));
    }
    if let Some(bad) = x0.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "x0 contains non-finite entry {bad}"
        )));
    }
    match cfg.chart {
        Chart::Z => {
            let plant = ZChart {
                system: &scn.system,
                from_z: &*scn.from_z,
            };
            let z0 = (scn.to_z)(x0);
            orchestrate(&scn.system, &plant, &z0, &scn.policies, cfg)
        }
        Chart::X => {
            let plant = XChart {
                n: scn.n,
                dynamics: &*scn.dynamics,
                to_z: &*scn.to_z,
            };
            orchestrate(&scn.system, &plant, x0, &scn.policies, cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rk4_is_exact_on_cubics() {
        // ẏ = 3t² written autonomously as (t, y)' = (1, 3t²).
        let y = rk4_step(|s| Ok(vec![1.0, 3.0 * s[0] * s[0]]), &[0.5, 0.0], 0.25).unwrap();
        assert_abs_diff_eq!(y[1], 0.75f64.powi(3) - 0.5f64.powi(3), epsilon = 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        let bad = IntegratorConfig {
            event_tol: 1e-3,
            ..IntegratorConfig::default()
        };
        assert!(bad.validate().unwrap_err().is_validation());
        assert!(IntegratorConfig::default()
            .with_dt(-1.0)
            .validate()
            .is_err());
        assert!(IntegratorConfig::default()
            .with_t_max(0.0)
            .validate()
            .is_err());
    }

    #[test]
    fn event_codes() {
        assert_eq!(EventKind::BranchSwitch.code(), 1);
        assert_eq!(EventKind::StepComplete.code(), 2);
        assert_eq!(EventKind::SurfaceSlide.code(), 3);
    }
}
