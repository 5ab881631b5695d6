//! Command-line front end.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stepsynth::config::{parse_chart, parse_floats, RunConfig};
use stepsynth::ctrl_fn::LinearSynth;
use stepsynth::gramian::GramSet;
use stepsynth::mappability::{
    halton, select_columns, verify_phi_conditions, DEFAULT_SAMPLES, DEFAULT_SVD_TOL,
};
use stepsynth::output::{emit_csv, emit_json, emit_svg};
use stepsynth::scenarios::{lookup, SCENARIO_NAMES};
use stepsynth::sim::simulate;

#[derive(Debug, Parser)]
#[command(
    name = "stepsynth",
    version,
    about = "Stepwise bounded-control synthesis and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario to the origin and write trajectory artifacts.
    Simulate(SimulateArgs),
    /// Evaluate the controllability function of one integrator chain.
    Theta(ThetaArgs),
    /// Print N(1), its inverse and optionally N(theta) as JSON.
    Gramian(GramianArgs),
    /// Recover block dimensions of a scenario from Lie-bracket ranks.
    Probe(ProbeArgs),
    /// Print the registered scenario names.
    ListScenarios,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario name, e.g. `pendulum` or `polyodd:3`.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Initial state in original coordinates, comma separated.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "z0")]
    pub x0: Option<String>,
    /// Initial state in block coordinates, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub event_tol: Option<f64>,
    /// Per-block done tolerance.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Integrate in the block chart (`z`) or the original chart (`x`).
    #[arg(long)]
    pub chart: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Flat `key = value` config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario parameter override, `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub a0: f64,
    /// Chain state, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
}

#[derive(Debug, Args)]
pub struct GramianArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub theta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub scenario: String,
    /// Sampling cube `[lo, hi]^n`, given as `lo,hi`.
    #[arg(
        long = "box",
        value_name = "LO,HI",
        default_value = "-1,1",
        allow_hyphen_values = true
    )]
    pub bounds: String,
    /// Number of Halton samples in the box.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SVD_TOL)]
    pub svd_tol: f64,
    /// Finite-difference step; scaled to each sample when omitted.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, f64>> {
    raw.iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("parameter `{kv}` is not of the form key=value"))?;
            let v: f64 = v
                .trim()
                .parse()
                .with_context(|| format!("parameter `{k}` is not a number"))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Write a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit_line(line: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    emit_line(&serde_json::to_string_pretty(v)?)
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        scenario: args.scenario,
        x0: args.x0.as_deref().map(parse_floats).transpose()?,
        dt: args.dt,
        tmax: args.tmax,
        event_tol: args.event_tol,
        delta: args.delta,
        out_dir: args.out_dir,
        chart: args.chart.as_deref().map(parse_chart).transpose()?,
        params: parse_params(&args.params)?,
    };
    let cfg = file.overridden_by(flags);
    let Some(name) = cfg.scenario.as_deref() else {
        bail!(stepsynth::error::Error::InvalidArgument(
            "no scenario given (--scenario or config `scenario`)".into()
        ));
    };
    let scn = lookup(name, &cfg.params)?;
    let x0 = match (&args.z0, &cfg.x0) {
        (Some(z), _) => {
            let z = parse_floats(z)?;
            if z.len() != scn.n {
                bail!(stepsynth::error::Error::InvalidArgument(format!(
                    "scenario {name} has dimension {} but z0 has {} entries",
                    scn.n,
                    z.len()
                )));
            }
            (scn.from_z)(&z)
        }
        (None, Some(x)) => x.clone(),
        (None, None) => bail!(stepsynth::error::Error::InvalidArgument(
            "no initial state (--x0, --z0 or config `x0`)".into()
        )),
    };
    let icfg = cfg.integrator()?;
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let (traj, summary) = simulate(&scn, &x0, &icfg)?;
    write_artifacts(&out_dir, &traj, &summary, scn.n)?;
    print_json(&summary)
}

fn write_artifacts(
    dir: &Path,
    traj: &stepsynth::sim::Trajectory,
    summary: &stepsynth::sim::RunSummary,
    n: usize,
) -> Result<()> {
    emit_csv(traj, &dir.join("traj.csv"))?;
    emit_json(summary, &dir.join("summary.json"))?;
    let mut projections = vec![(1, 2)];
    if n > 2 {
        projections.push((n - 1, n));
    }
    for (i, j) in projections {
        emit_svg(traj, (i, j), &dir.join(format!("proj_x{i}_x{j}.svg")))?;
    }
    Ok(())
}

fn run_theta(args: ThetaArgs) -> Result<()> {
    let x = parse_floats(&args.x)?;
    let synth = LinearSynth::from_a0(GramSet::new(args.k)?, args.a0)?;
    let eval = synth.theta_of(&x)?;
    print_json(&json!({
        "k": args.k,
        "a0": synth.a0(),
        "d": synth.d(),
        "x": x,
        "theta": eval.theta,
        "w": eval.w,
        "v": eval.v,
        "sigma": eval.sigma,
    }))
}

fn run_gramian(args: GramianArgs) -> Result<()> {
    let g = GramSet::new(args.k)?;
    let mut out = json!({
        "k": args.k,
        "n1": matrix_rows(g.n1()),
        "n1_inv": matrix_rows(g.n1_inv()),
        "inversion_residual": g.inversion_residual(),
    });
    if let Some(theta) = args.theta {
        if !(theta > 0.0 && theta.is_finite()) {
            bail!(stepsynth::error::Error::InvalidArgument(format!(
                "theta = {theta} must be positive"
            )));
        }
        out["theta"] = json!(theta);
        out["n_theta"] = json!(matrix_rows(&g.gram_theta(theta)));
    }
    print_json(&out)
}

fn parse_box(raw: &str) -> Result<(f64, f64)> {
    let bounds: Vec<f64> = raw
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()?;
    match bounds[..] {
        [lo, hi] if lo < hi && lo.is_finite() && hi.is_finite() => Ok((lo, hi)),
        _ => bail!(stepsynth::error::Error::InvalidArgument(format!(
            "box must be two finite numbers lo,hi with lo < hi, got `{raw}`"
        ))),
    }
}

fn run_probe(args: ProbeArgs) -> Result<()> {
    let scn = lookup(&args.scenario, &parse_params(&args.params)?)?;
    if args.samples == 0 {
        bail!(stepsynth::error::Error::InvalidArgument(
            "at least one sample is required".into()
        ));
    }
    let (lo, hi) = parse_box(&args.bounds)?;
    let samples = halton(scn.n, args.samples, lo, hi, 1);
    let pf = &scn.probe;
    let report = select_columns(&pf.a, &pf.bs, &samples, args.h, args.svd_tol)?;
    let phi = verify_phi_conditions(&pf.phi_grads, &report, &pf.a, &pf.bs, &samples)?;
    print_json(&json!({
        "scenario": scn.name,
        "indices": report.indices,
        "kept": report.kept,
        "box": [lo, hi],
        "sample_count": samples.len(),
        "svd_tol": report.svd_tol,
        "phi_conditions_passed": phi.all_passed(),
        "phi_conditions": phi.conditions,
    }))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Theta(a) => run_theta(a),
        Command::Gramian(a) => run_gramian(a),
        Command::Probe(a) => run_probe(a),
        Command::ListScenarios => SCENARIO_NAMES.iter().try_for_each(|name| emit_line(name)),
    }
}
