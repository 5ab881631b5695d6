//! Run artifacts: trajectory CSV, JSON summary and SVG phase projections.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{RunSummary, Trajectory};

/// Most points drawn per SVG polyline; longer runs are thinned evenly.
const SVG_MAX_POINTS: usize = 4000;

/// Format like C's `%.12e`: twelve fractional digits and a signed exponent
/// of at least two digits.
pub fn c_sci(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{v:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// CSV text with columns `t, x1..xn, z1..zn, u, event`.
pub fn csv_string(traj: &Trajectory) -> String {
    let n = traj.dim();
    let mut out = String::from("t");
    for prefix in ["x", "z"] {
        for i in 1..=n {
            let _ = write!(out, ",{prefix}{i}");
        }
    }
    out.push_str(",u,event\n");
    for k in 0..traj.len() {
        out.push_str(&c_sci(traj.times[k]));
        for v in traj.xs[k].iter().chain(&traj.zs[k]) {
            out.push(',');
            out.push_str(&c_sci(*v));
        }
        let _ = writeln!(out, ",{},{}", c_sci(traj.controls[k]), traj.flags[k]);
    }
    out
}

pub fn emit_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, csv_string(traj)).map_err(|e| io_err(path, e))
}

pub fn emit_json(summary: &RunSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// SVG of the original-coordinate projection `(x_i, x_j)`, one-based,
/// with a circle at every event sample.
pub fn svg_string(traj: &Trajectory, projection: (usize, usize)) -> Result<String> {
    let n = traj.dim();
    let (i, j) = projection;
    if i == 0 || j == 0 || (n > 0 && (i > n || j > n)) || i == j {
        return Err(Error::InvalidArgument(format!(
            "projection ({i}, {j}) invalid for a {n}-dimensional trajectory"
        )));
    }
    let pts: Vec<(f64, f64)> = traj.xs.iter().map(|x| (x[i - 1], x[j - 1])).collect();
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in &pts {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if pts.is_empty() {
        (xmin, xmax, ymin, ymax) = (-1.0, 1.0, -1.0, 1.0);
    }
    let w = (xmax - xmin).max(1e-9);
    let h = (ymax - ymin).max(1e-9);
    let pad = 0.05 * w.max(h);
    let stroke = 0.003 * w.max(h);
    // SVG y grows downward, so plot -y.
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="640" height="640" preserveAspectRatio="xMidYMid meet">"#,
        xmin - pad,
        -ymax - pad,
        w + 2.0 * pad,
        h + 2.0 * pad
    );
    let _ = writeln!(svg, "  <title>x{i} vs x{j}</title>");
    let stride = pts.len().div_ceil(SVG_MAX_POINTS).max(1);
    let mut line = String::new();
    for (k, &(x, y)) in pts.iter().enumerate() {
        if k % stride == 0 || k + 1 == pts.len() || traj.flags[k] != 0 {
            let _ = write!(line, "{x},{} ", -y);
        }
    }
    let _ = writeln!(
        svg,
        r#"  <polyline fill="none" stroke="steelblue" stroke-width="{stroke}" points="{}"/>"#,
        line.trim_end()
    );
    for (k, &(x, y)) in pts.iter().enumerate() {
        if traj.flags[k] != 0 {
            let color = match traj.flags[k] {
                2 => "firebrick",
                3 => "darkorange",
                _ => "seagreen",
            };
            let _ = writeln!(
                svg,
                r#"  <circle cx="{x}" cy="{}" r="{}" fill="{color}"/>"#,
                -y,
                3.0 * stroke
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg(traj: &Trajectory, projection: (usize, usize), path: &Path) -> Result<()> {
    let svg = svg_string(traj, projection)?;
    fs::write(path, svg).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponent() {
        assert_eq!(c_sci(0.0), "0.000000000000e+00");
        assert_eq!(c_sci(1.5), "1.500000000000e+00");
        assert_eq!(c_sci(-2.5e-7), "-2.500000000000e-07");
        assert_eq!(c_sci(3.0e120), "3.000000000000e+120");
    }

    #[test]
    fn empty_trajectory_is_header_only() {
        let s = csv_string(&Trajectory::default());
        assert_eq!(s.lines().count(), 1);
    }

    #[test]
    fn bad_projection_rejected() {
        let mut t = Trajectory::default();
        t.push(0.0, vec![1.0, 2.0], vec![1.0, 2.0], 0.0, 0);
        assert!(svg_string(&t, (1, 3)).is_err());
        assert!(svg_string(&t, (1, 1)).is_err());
        assert!(svg_string(&t, (1, 2)).unwrap().contains("<polyline"));
    }
}
