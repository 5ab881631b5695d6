//! Stepwise synthesis: one switching policy per coordinate block, applied
//! in order, each step driving its block to the origin while the blocks
//! already zeroed stay pinned.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::Serialize;

use crate::ctrl_fn::LinearSynth;
use crate::error::{Error, Result};
use crate::sim::{rk4_step, EventKind, IntegratorConfig, Plant, Trajectory};

/// State feedback `z ↦ u`, possibly failing on states outside its domain.
pub type ControlLaw = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;
/// Residual dynamics `(z, u) ↦ (H_1, …, H_m)`.
pub type ResidualDynamics = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;
/// Signed distance `(pos, vel) ↦ r` of a point of a two-dimensional block
/// from its switching curve; positive above the curve.
pub type CurveResidual = Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>;

/// Block sizes `(n_1, …, n_m)` with offsets `s_0 = 0, s_i = n_1 + … + n_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "block sizes must be positive and nonempty, got {sizes:?}"
            )));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Self { sizes, offsets })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Number of blocks `m`.
    pub fn m(&self) -> usize {
        self.sizes.len()
    }

    /// Total dimension `n`.
    pub fn n(&self) -> usize {
        self.offsets[self.m()]
    }

    /// Index range of block `i` (zero-based).
    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn block<'a>(&self, z: &'a [f64], i: usize) -> &'a [f64] {
        &z[self.range(i)]
    }

    /// `‖z^i‖_∞`.
    pub fn block_norm(&self, z: &[f64], i: usize) -> f64 {
        self.block(z, i).iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// `‖z^i‖_∞ ≤ δ` for the zero-based block `i`.
pub fn step_done(z: &[f64], partition: &BlockPartition, i: usize, delta: f64) -> bool {
    partition.block_norm(z, i) <= delta
}

/// Chains of integrators closed by residual dynamics:
/// `ż_s = z_{s+1}` inside each block and `ż_{s_i} = H_i(z, u)`.
#[derive(Clone)]
pub struct BlockSystem {
    partition: BlockPartition,
    residual: ResidualDynamics,
}

impl fmt::Debug for BlockSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockSystem")
            .field("partition", &self.partition)
            .finish_non_exhaustive()
    }
}

impl BlockSystem {
    pub fn new(partition: BlockPartition, residual: ResidualDynamics) -> Self {
        Self {
            partition,
            residual,
        }
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn residual(&self, z: &[f64], u: f64) -> Vec<f64> {
        (self.residual)(z, u)
    }

    pub fn rhs(&self, z: &[f64], u: f64) -> Vec<f64> {
        let h = self.residual(z, u);
        let mut dz = vec![0.0; z.len()];
        for i in 0..self.partition.m() {
            let r = self.partition.range(i);
            dz[r.start..r.end - 1].copy_from_slice(&z[r.start + 1..r.end]);
            dz[r.end - 1] = h[i];
        }
        dz
    }
}

/// The three branches of a switching rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
    Zero,
}

/// Θ-feedback switching: `u⁻` on `S⁺ = {σ > 0}`, `u⁺` on `S⁻ = {σ < 0}`,
/// and `u⁰` (or the midpoint of `u±`) on the band `|σ| ≤ surface_tol`.
#[derive(Clone)]
pub struct ThetaSwitch {
    pub synth: LinearSynth,
    pub u_plus: ControlLaw,
    pub u_minus: ControlLaw,
    pub u_zero: Option<ControlLaw>,
    pub surface_tol: f64,
    /// Half-width of the hysteresis band used while sliding without `u⁰`.
    pub chatter_band: f64,
}

impl ThetaSwitch {
    pub fn new(synth: LinearSynth, u_plus: ControlLaw, u_minus: ControlLaw) -> Self {
        // σ ranges over [-2d, 2d].
        let scale = 2.0 * synth.d();
        Self {
            synth,
            u_plus,
            u_minus,
            u_zero: None,
            surface_tol: 1e-9 * scale,
            chatter_band: 1e-3 * scale,
        }
    }

    pub fn with_u_zero(mut self, u_zero: ControlLaw) -> Self {
        self.u_zero = Some(u_zero);
        self
    }

    pub fn with_surface_tol(mut self, tol: f64) -> Self {
        self.surface_tol = tol;
        self
    }

    pub fn with_chatter_band(mut self, band: f64) -> Self {
        self.chatter_band = band;
        self
    }
}

/// Bang-bang switching across a curve in the phase plane of a
/// two-dimensional block: `u⁺` below, `u⁻` above. On the curve itself the
/// `+` branch owns `pos ≥ 0` and the `-` branch owns `pos ≤ 0`.
#[derive(Clone)]
pub struct CurveSwitch {
    pub residual: CurveResidual,
    pub u_plus: ControlLaw,
    pub u_minus: ControlLaw,
    /// Points with `|r| ≤ tie_band` count as lying on the curve.
    pub tie_band: f64,
}

impl CurveSwitch {
    pub fn new(residual: CurveResidual, u_plus: ControlLaw, u_minus: ControlLaw) -> Self {
        Self {
            residual,
            u_plus,
            u_minus,
            tie_band: 1e-11,
        }
    }

    pub fn with_tie_band(mut self, band: f64) -> Self {
        self.tie_band = band;
        self
    }
}

/// `u = plus` while the block's first coordinate is negative and
/// `u = -minus` while it is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstSign {
    pub plus: f64,
    pub minus: f64,
}

impl ConstSign {
    pub fn symmetric(level: f64) -> Self {
        Self {
            plus: level,
            minus: level,
        }
    }
}

#[derive(Clone)]
pub enum StepPolicy {
    ThetaSwitch(ThetaSwitch),
    CurveSwitch(CurveSwitch),
    ConstSign(ConstSign),
}

impl fmt::Debug for StepPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepPolicy::ConstSign(c) => f.debug_tuple("ConstSign").field(c).finish(),
            other => f.write_str(other.label()),
        }
    }
}

impl StepPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            StepPolicy::ThetaSwitch(_) => "theta-switch",
            StepPolicy::CurveSwitch(_) => "curve-switch",
            StepPolicy::ConstSign(_) => "const-sign",
        }
    }

    /// `Θ_i(z^i)`, the time bound of a Θ-feedback step.
    pub fn theta_bound(
        &self,
        z: &[f64],
        partition: &BlockPartition,
        i: usize,
    ) -> Result<Option<f64>> {
        match self {
            StepPolicy::ThetaSwitch(p) => Ok(Some(p.synth.theta_of(partition.block(z, i))?.theta)),
            _ => Ok(None),
        }
    }

    /// Branch selected by the switching rule. `current` breaks ties that the
    /// rule leaves open (a point exactly on a surface where both branches
    /// are admissible); `None` applies the static tie rule.
    pub fn classify(
        &self,
        z: &[f64],
        partition: &BlockPartition,
        i: usize,
        current: Option<Branch>,
    ) -> Result<Branch> {
        let block = partition.block(z, i);
        match self {
            StepPolicy::ThetaSwitch(p) => {
                let sigma = p.synth.theta_of(block)?.sigma;
                Ok(if sigma > p.surface_tol {
                    Branch::Minus
                } else if sigma < -p.surface_tol {
                    Branch::Plus
                } else {
                    Branch::Zero
                })
            }
            StepPolicy::CurveSwitch(p) => {
                if block.len() != 2 {
                    return Err(Error::InvalidArgument(format!(
                        "curve switching needs a two-dimensional block, block {} has {}",
                        i + 1,
                        block.len()
                    )));
                }
                let (pos, vel) = (block[0], block[1]);
                let r = (p.residual)(pos, vel)?;
                Ok(if r.abs() <= p.tie_band {
                    if pos > 0.0 {
                        Branch::Plus
                    } else if pos < 0.0 {
                        Branch::Minus
                    } else {
                        current.unwrap_or(Branch::Plus)
                    }
                } else if r < 0.0 {
                    Branch::Plus
                } else {
                    Branch::Minus
                })
            }
            StepPolicy::ConstSign(_) => Ok(if block[0] < 0.0 {
                Branch::Plus
            } else if block[0] > 0.0 {
                Branch::Minus
            } else {
                current.unwrap_or(Branch::Zero)
            }),
        }
    }

    /// Control value of a given branch at `z`.
    pub fn control(&self, z: &[f64], branch: Branch) -> Result<f64> {
        match self {
            StepPolicy::ThetaSwitch(p) => match branch {
                Branch::Plus => (p.u_plus)(z),
                Branch::Minus => (p.u_minus)(z),
                Branch::Zero => match &p.u_zero {
                    Some(u0) => u0(z),
                    None => Ok(0.5 * ((p.u_plus)(z)? + (p.u_minus)(z)?)),
                },
            },
            StepPolicy::CurveSwitch(p) => match branch {
                Branch::Plus => (p.u_plus)(z),
                Branch::Minus | Branch::Zero => (p.u_minus)(z),
            },
            StepPolicy::ConstSign(c) => Ok(match branch {
                Branch::Plus => c.plus,
                Branch::Minus => -c.minus,
                Branch::Zero => 0.0,
            }),
        }
    }

    /// The static three-branch rule: `u⁻` on `S⁺`, `u⁺` on `S⁻`, `u⁰` on `S`.
    pub fn eval_control(&self, z: &[f64], partition: &BlockPartition, i: usize) -> Result<f64> {
        let branch = self.classify(z, partition, i, None)?;
        self.control(z, branch)
    }
}

/// Timing record of one step, as serialized in run summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    /// One-based step index.
    pub i: usize,
    #[serde(rename = "T_start")]
    pub t_start: f64,
    #[serde(rename = "T_end")]
    pub t_end: f64,
    pub theta_bound: Option<f64>,
    pub policy: String,
}

/// Bookkeeping of an orchestrated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepwiseRun {
    /// Zero-based index of the step in progress (`m` once all are done).
    pub active_step: usize,
    pub step_starts: Vec<f64>,
    /// Absolute completion times `T_1 ≤ … ≤ T_m`.
    pub step_times: Vec<f64>,
    pub done_tol: f64,
    pub theta_bounds: Vec<Option<f64>>,
    pub policies: Vec<String>,
    /// `max ‖z^j(t)‖_∞` over `t ≥ T_j` for every completed block `j`.
    pub hold_residuals: Vec<f64>,
}

impl StepwiseRun {
    pub fn total_time(&self) -> f64 {
        self.step_times.last().copied().unwrap_or(0.0)
    }

    pub fn records(&self) -> Vec<StepRecord> {
        self.step_times
            .iter()
            .enumerate()
            .map(|(i, &t_end)| StepRecord {
                i: i + 1,
                t_start: self.step_starts[i],
                t_end,
                theta_bound: self.theta_bounds[i],
                policy: self.policies[i].clone(),
            })
            .collect()
    }
}

/// Two branch switches closer than this many steps start a sliding phase.
const SLIDE_WINDOW_STEPS: f64 = 4.0;
const GOLDEN: f64 = 0.618_033_988_749_894_9;
/// A block this far inside the done tolerance counts as arrived at once.
const DEEP_INSIDE: f64 = 1e-3;

struct Engine<'a> {
    sys: &'a BlockSystem,
    plant: &'a dyn Plant,
    policies: &'a [StepPolicy],
    cfg: &'a IntegratorConfig,
}

impl Engine<'_> {
    fn partition(&self) -> &BlockPartition {
        self.sys.partition()
    }

    fn control(&self, step: usize, y: &[f64], branch: Branch) -> Result<f64> {
        self.policies[step].control(&self.plant.z_of(y), branch)
    }

    fn advance(&self, step: usize, y: &[f64], h: f64, branch: Branch) -> Result<Vec<f64>> {
        rk4_step(
            |s| {
                let u = self.control(step, s, branch)?;
                Ok(self.plant.rhs(s, u))
            },
            y,
            h,
        )
    }

    /// Branch at `y` given the current branch and the sliding flag.
    fn classify(&self, step: usize, y: &[f64], current: Branch, sliding: bool) -> Result<Branch> {
        let z = self.plant.z_of(y);
        let policy = &self.policies[step];
        match policy {
            StepPolicy::ThetaSwitch(p) if sliding => {
                let sigma = p.synth.theta_of(self.partition().block(&z, step))?.sigma;
                Ok(slide_branch(p, sigma, current, self.cfg.hysteresis))
            }
            _ => policy.classify(&z, self.partition(), step, Some(current)),
        }
    }

    /// `dσ/dt` under both branches, by central differences along the flow.
    fn sigma_rates(&self, step: usize, z: &[f64], p: &ThetaSwitch) -> Result<(f64, f64)> {
        let part = self.partition();
        let theta = p.synth.theta_of(part.block(z, step))?.theta;
        let h = 1e-6 * theta.max(1e-12);
        let rate = |u: f64| -> Result<f64> {
            let dz = self.sys.rhs(z, u);
            let shifted =
                |s: f64| -> Vec<f64> { z.iter().zip(&dz).map(|(a, b)| a + s * b).collect() };
            let fwd = p.synth.theta_of(part.block(&shifted(h), step))?.sigma;
            let bwd = p.synth.theta_of(part.block(&shifted(-h), step))?.sigma;
            Ok((fwd - bwd) / (2.0 * h))
        };
        Ok((rate((p.u_plus)(z)?)?, rate((p.u_minus)(z)?)?))
    }

    /// Whether the surface still attracts from both sides.
    fn sliding_holds(&self, step: usize, y: &[f64]) -> Result<bool> {
        match &self.policies[step] {
            StepPolicy::ThetaSwitch(p) => {
                let z = self.plant.z_of(y);
                let (up, um) = self.sigma_rates(step, &z, p)?;
                Ok(up > 0.0 && um < 0.0)
            }
            _ => Ok(true),
        }
    }

    fn block_rate(&self, step: usize, y: &[f64], branch: Branch) -> Result<f64> {
        let u = self.control(step, y, branch)?;
        let dy = self.plant.rhs(y, u);
        // Rate of the block coordinates, estimated in the integrated chart.
        let z0 = self.plant.z_of(y);
        let eps = 1e-7;
        let y1: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + eps * b).collect();
        let z1 = self.plant.z_of(&y1);
        let r = self.partition().range(step);
        Ok(r.map(|s| ((z1[s] - z0[s]) / eps).abs()).fold(0.0, f64::max))
    }

    /// Closest approach of block `step` to the origin within `[0, tau]`, if
    /// it lies inside the done tolerance.
    ///
    /// The block norm is minimized by golden-section search. A minimum at
    /// the right end of a full step means the block is still closing in, so
    /// the step goes on unless it is already far inside the tolerance. A step
    /// cut short by a branch switch ends on the switching set, where closing
    /// in further would only chatter.
    fn arrival(
        &self,
        step: usize,
        y0: &[f64],
        y1: &[f64],
        tau: f64,
        cut: bool,
        branch: Branch,
    ) -> Result<Option<(f64, Vec<f64>)>> {
        let part = self.partition();
        let delta = self.cfg.done_tol;
        let norm = |y: &[f64]| part.block_norm(&self.plant.z_of(y), step);
        let (n0, n1) = (norm(y0), norm(y1));
        if n1 <= DEEP_INSIDE * delta {
            return Ok(Some((tau, y1.to_vec())));
        }
        let rate = 2.0
            * self
                .block_rate(step, y0, branch)?
                .max(self.block_rate(step, y1, branch)?);
        if 0.5 * (n0 + n1 - rate * tau) > delta {
            return Ok(None);
        }
        let phi = |s: f64| -> Result<(f64, Vec<f64>)> {
            let y = self.advance(step, y0, s, branch)?;
            Ok((norm(&y), y))
        };
        let (mut a, mut b) = (0.0, tau);
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let (mut fc, mut yc) = phi(c)?;
        let (mut fd, mut yd) = phi(d)?;
        while b - a > self.cfg.event_tol {
            if fc <= fd {
                b = d;
                (d, fd, yd) = (c, fc, yc.clone());
                c = b - GOLDEN * (b - a);
                (fc, yc) = phi(c)?;
            } else {
                a = c;
                (c, fc, yc) = (d, fd, yd.clone());
                d = a + GOLDEN * (b - a);
                (fd, yd) = phi(d)?;
            }
        }
        let (s, f, y) = if fc <= fd { (c, fc, yc) } else { (d, fd, yd) };
        if n0 <= f && n0 <= delta {
            return Ok(Some((0.0, y0.to_vec())));
        }
        let interior = s < tau - 2.0 * self.cfg.event_tol;
        Ok((f <= delta && (interior || cut)).then_some((s, y)))
    }
}

/// Hysteresis rule while sliding on `S`.
fn slide_branch(p: &ThetaSwitch, sigma: f64, current: Branch, factor: f64) -> Branch {
    if p.u_zero.is_some() {
        let entry = p.surface_tol;
        let exit = factor * entry;
        match current {
            Branch::Zero if sigma > exit => Branch::Minus,
            Branch::Zero if sigma < -exit => Branch::Plus,
            Branch::Zero => Branch::Zero,
            Branch::Minus if sigma <= entry => Branch::Zero,
            Branch::Plus if sigma >= -entry => Branch::Zero,
            other => other,
        }
    } else {
        let b = p.chatter_band;
        match current {
            Branch::Minus if sigma < -b => Branch::Plus,
            Branch::Plus if sigma > b => Branch::Minus,
            Branch::Zero if sigma > 0.0 => Branch::Minus,
            Branch::Zero if sigma < 0.0 => Branch::Plus,
            other => other,
        }
    }
}

/// Run the policies in order from `y0`, each until its block reaches the
/// done tolerance, keeping completed blocks under watch.
///
/// `y0` is given in the plant's chart. Returns the timing record and the
/// sampled trajectory.
pub fn orchestrate(
    sys: &BlockSystem,
    plant: &dyn Plant,
    y0: &[f64],
    policies: &[StepPolicy],
    cfg: &IntegratorConfig,
) -> Result<(StepwiseRun, Trajectory)> {
    cfg.validate()?;
    let part = sys.partition();
    let m = part.m();
    if policies.len() != m {
        return Err(Error::InvalidArgument(format!(
            "{} policies supplied for {m} blocks",
            policies.len()
        )));
    }
    if y0.len() != plant.dim() || plant.dim() != part.n() {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} entries, system dimension is {}",
            y0.len(),
            part.n()
        )));
    }
    let eng = Engine {
        sys,
        plant,
        policies,
        cfg,
    };
    let delta = cfg.done_tol;
    let hold_limit = cfg.hold_factor * delta;
    let mut run = StepwiseRun {
        active_step: 0,
        step_starts: Vec::with_capacity(m),
        step_times: Vec::with_capacity(m),
        done_tol: delta,
        theta_bounds: Vec::with_capacity(m),
        policies: policies.iter().map(|p| p.label().to_string()).collect(),
        hold_residuals: Vec::with_capacity(m),
    };
    let mut traj = Trajectory::default();
    let mut t = 0.0;
    let mut y = y0.to_vec();

    let record = |traj: &mut Trajectory, t: f64, y: &[f64], u: f64, flag: u8| {
        traj.push(t, plant.x_of(y), plant.z_of(y), u, flag);
    };
    let check_hold = |run: &mut StepwiseRun, y: &[f64], t: f64| -> Result<()> {
        let z = plant.z_of(y);
        for (j, res) in run.hold_residuals.iter_mut().enumerate() {
            let r = part.block_norm(&z, j);
            *res = res.max(r);
            if r > hold_limit {
                return Err(Error::HoldViolation {
                    block: j + 1,
                    residual: r,
                    limit: hold_limit,
                    t,
                });
            }
        }
        Ok(())
    };

    for step in 0..m {
        run.active_step = step;
        let z = plant.z_of(&y);
        let policy = &policies[step];
        let bound = policy.theta_bound(&z, part, step)?;
        run.step_starts.push(t);
        run.theta_bounds.push(bound);
        let t_start = t;

        if part.block_norm(&z, step) > delta {
            let mut branch = policy.classify(&z, part, step, None)?;
            if traj.is_empty() {
                let u = eng.control(step, &y, branch)?;
                record(&mut traj, t, &y, u, 0);
            }
            let mut sliding = false;
            let mut last_switch: Option<f64> = None;
            loop {
                if let Some(b) = bound {
                    let elapsed = t - t_start;
                    if elapsed > 2.0 * b + cfg.dt {
                        return Err(Error::StepTimeout {
                            step: step + 1,
                            elapsed,
                            bound: b,
                        });
                    }
                }
                if t >= cfg.t_max {
                    return Err(Error::Timeout(cfg.t_max));
                }
                let h = cfg.dt.min(cfg.t_max - t);
                let mut y1 = eng.advance(step, &y, h, branch)?;
                if y1.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(t + h));
                }
                let mut tau = h;
                let mut next = eng.classify(step, &y1, branch, sliding)?;
                if next != branch {
                    let (mut lo, mut hi) = (0.0, h);
                    while hi - lo > cfg.event_tol {
                        let mid = 0.5 * (lo + hi);
                        let ym = eng.advance(step, &y, mid, branch)?;
                        let bm = eng.classify(step, &ym, branch, sliding)?;
                        if bm != branch {
                            hi = mid;
                            y1 = ym;
                            next = bm;
                        } else {
                            lo = mid;
                        }
                    }
                    tau = hi;
                }

                if let Some((ta, ya)) = eng.arrival(step, &y, &y1, tau, next != branch, branch)? {
                    t += ta;
                    y = ya;
                    let u = eng.control(step, &y, branch)?;
                    record(&mut traj, t, &y, u, EventKind::StepComplete.code());
                    check_hold(&mut run, &y, t)?;
                    break;
                }

                t += tau;
                y = y1;
                let u = eng.control(step, &y, branch)?;
                record(&mut traj, t, &y, u, 0);
                check_hold(&mut run, &y, t)?;

                if next != branch {
                    traj.mark_last(EventKind::BranchSwitch);
                    traj.events.push(crate::sim::Event {
                        t,
                        kind: EventKind::BranchSwitch,
                        step: step + 1,
                        detail: format!("{branch:?} -> {next:?}").to_lowercase(),
                    });
                    let close = last_switch.is_some_and(|s| t - s <= SLIDE_WINDOW_STEPS * cfg.dt);
                    if close && !sliding {
                        sliding = true;
                        traj.mark_last(EventKind::SurfaceSlide);
                        traj.events.push(crate::sim::Event {
                            t,
                            kind: EventKind::SurfaceSlide,
                            step: step + 1,
                            detail: "enter".into(),
                        });
                    } else if sliding && !eng.sliding_holds(step, &y)? {
                        sliding = false;
                        next = policy.classify(&plant.z_of(&y), part, step, Some(next))?;
                        traj.events.push(crate::sim::Event {
                            t,
                            kind: EventKind::SurfaceSlide,
                            step: step + 1,
                            detail: "release".into(),
                        });
                    }
                    last_switch = Some(t);
                    branch = next;
                } else if sliding
                    && !matches!(policy, StepPolicy::ThetaSwitch(_))
                    && last_switch.is_some_and(|s| t - s > SLIDE_WINDOW_STEPS * cfg.dt)
                {
                    sliding = false;
                }
            }
        } else if traj.is_empty() {
            record(&mut traj, t, &y, 0.0, EventKind::StepComplete.code());
        } else {
            traj.mark_last(EventKind::StepComplete);
        }

        traj.events.push(crate::sim::Event {
            t,
            kind: EventKind::StepComplete,
            step: step + 1,
            detail: format!("block {} within {delta:e}", step + 1),
        });
        run.step_times.push(t);
        run.hold_residuals
            .push(part.block_norm(&plant.z_of(&y), step));
    }
    run.active_step = m;
    Ok((run, traj))
}
