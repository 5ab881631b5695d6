//! Flat `key = value` run configuration.
//!
//! Keys mirror the `simulate` flags (`scenario`, `x0`, `dt`, `tmax`,
//! `event-tol`, `delta`, `out-dir`, `chart`); underscores and dashes are
//! interchangeable in them. Any other key is passed to the scenario as a
//! numeric parameter. Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::{Chart, IntegratorConfig};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub dt: Option<f64>,
    pub tmax: Option<f64>,
    pub event_tol: Option<f64>,
    pub delta: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub chart: Option<Chart>,
    pub params: BTreeMap<String, f64>,
}

/// Parse `1,-2.5,3e-4` into floats.
pub fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("`{t}` is not a finite number")))
        })
        .collect()
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::InvalidArgument(format!("value of `{key}` is not a number: `{v}`")))
}

pub fn parse_chart(v: &str) -> Result<Chart> {
    match v {
        "z" => Ok(Chart::Z),
        "x" => Ok(Chart::X),
        _ => Err(Error::InvalidArgument(format!(
            "chart must be `z` or `x`, got `{v}`"
        ))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key.replace('_', "-").as_str() {
                "scenario" => cfg.scenario = Some(value.to_string()),
                "x0" => cfg.x0 = Some(parse_floats(value)?),
                "dt" => cfg.dt = Some(parse_f64(key, value)?),
                "tmax" | "t-max" => cfg.tmax = Some(parse_f64(key, value)?),
                "event-tol" => cfg.event_tol = Some(parse_f64(key, value)?),
                "delta" => cfg.delta = Some(parse_f64(key, value)?),
                "out-dir" => cfg.out_dir = Some(PathBuf::from(value)),
                "chart" => cfg.chart = Some(parse_chart(value)?),
                _ => {
                    cfg.params.insert(key.to_string(), parse_f64(key, value)?);
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Values set in `over` replace those in `self`; parameters merge.
    pub fn overridden_by(mut self, over: RunConfig) -> Self {
        self.scenario = over.scenario.or(self.scenario);
        self.x0 = over.x0.or(self.x0);
        self.dt = over.dt.or(self.dt);
        self.tmax = over.tmax.or(self.tmax);
        self.event_tol = over.event_tol.or(self.event_tol);
        self.delta = over.delta.or(self.delta);
        self.out_dir = over.out_dir.or(self.out_dir);
        self.chart = over.chart.or(self.chart);
        self.params.extend(over.params);
        self
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        let d = IntegratorConfig::default();
        let cfg = IntegratorConfig {
            dt: self.dt.unwrap_or(d.dt),
            event_tol: self.event_tol.unwrap_or(d.event_tol),
            t_max: self.tmax.unwrap_or(d.t_max),
            done_tol: self.delta.unwrap_or(d.done_tol),
            chart: self.chart.unwrap_or(d.chart),
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
