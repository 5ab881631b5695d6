//! Numeric probe of block reducibility.
//!
//! Given the drift `a` and input fields `b_1, …, b_m` of
//! `ẋ = a(x) + Σ b_j(x) β_j(x, u)`, the probe scans the columns
//! `ad_a^s b_j` in the order `b_1, …, b_m, ad_a b_1, …, ad_a b_m, …`,
//! keeps the ones that raise the rank at every sample point, and reads
//! the block sizes `n_j` off the kept set. Lie brackets use central
//! differences.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Deepest bracket nesting the probe will differentiate through.
pub const MAX_BRACKET_ORDER: usize = 3;
pub const DEFAULT_SVD_TOL: f64 = 1e-6;
pub const DEFAULT_SAMPLES: usize = 32;

type FieldFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A smooth vector field on `ℝⁿ`.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    eval: FieldFn,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl VectorField {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| vec![0.0; dim])
    }

    pub fn constant(v: Vec<f64>) -> Self {
        Self::new(v.len(), move |_| v.clone())
    }

    /// Unit field `e_i` (zero-based `i`).
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self::constant(v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }
}

/// `cbrt(ε)·max(1, ‖x‖)`, the usual central-difference step.
pub fn default_step(x: &[f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    f64::EPSILON.cbrt() * norm.max(1.0)
}

fn jacobian_times(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    // J(x)·v = Σ_k v_k ∂f/∂x_k, one central difference per nonzero v_k.
    let n = x.len();
    let mut out = vec![0.0; n];
    let mut xp = x.to_vec();
    for (k, &vk) in v.iter().enumerate() {
        if vk == 0.0 {
            continue;
        }
        xp[k] = x[k] + h;
        let fp = f(&xp);
        xp[k] = x[k] - h;
        let fm = f(&xp);
        xp[k] = x[k];
        for i in 0..n {
            out[i] += vk * (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    out
}

fn check_dims(a: &VectorField, b: &VectorField, x: &[f64]) -> Result<()> {
    if a.dim != b.dim || x.len() != a.dim {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: fields {} and {}, point {}",
            a.dim,
            b.dim,
            x.len()
        )));
    }
    Ok(())
}

/// `[a, b](x) = b_x(x) a(x) − a_x(x) b(x)`.
pub fn lie_bracket(a: &VectorField, b: &VectorField, x: &[f64], h: f64) -> Result<Vec<f64>> {
    check_dims(a, b, x)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "difference step must be positive, got {h}"
        )));
    }
    Ok(bracket_raw(&|y| a.eval(y), &|y| b.eval(y), x, h))
}

fn bracket_raw(
    a: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let bx_a = jacobian_times(b, x, &a(x), h);
    let ax_b = jacobian_times(a, x, &b(x), h);
    bx_a.iter().zip(&ax_b).map(|(p, q)| p - q).collect()
}

/// `ad_a^k b(x)` for `k ≤ 3`.
pub fn ad_pow(a: &VectorField, b: &VectorField, k: usize, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if k > MAX_BRACKET_ORDER {
        return Err(Error::CapExceeded(k));
    }
    check_dims(a, b, x)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "difference step must be positive, got {h}"
        )));
    }
    Ok(ad_raw(a, b, k, x, h))
}

fn ad_raw(a: &VectorField, b: &VectorField, k: usize, x: &[f64], h: f64) -> Vec<f64> {
    if k == 0 {
        return b.eval(x);
    }
    let inner = |y: &[f64]| ad_raw(a, b, k - 1, y, h);
    bracket_raw(&|y| a.eval(y), &inner, x, h)
}

/// Numeric rank with a threshold relative to the largest singular value.
pub fn numeric_rank(columns: &[Vec<f64>], svd_tol: f64) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let n = columns[0].len();
    let m = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let sv = m.singular_values();
    let smax = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > svd_tol * smax).count()
}

/// Points of the Halton sequence mapped into `[lo, hi]^n`, starting at
/// index `1 + skip`.
pub fn halton(n: usize, count: usize, lo: f64, hi: f64, skip: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    let radical_inverse = |mut i: u64, base: u64| {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    };
    (0..count)
        .map(|c| {
            let idx = (c + 1 + skip) as u64;
            (0..n)
                .map(|d| lo + (hi - lo) * radical_inverse(idx, PRIMES[d % PRIMES.len()]))
                .collect()
        })
        .collect()
}

/// Outcome of [`select_columns`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Kept columns as `(j, k)`: field `b_j` (one-based) under `ad_a^k`.
    pub kept: Vec<(usize, usize)>,
    /// Block sizes `n_1, …, n_m`.
    pub indices: Vec<usize>,
    /// Rank `c_j` after each scanned column, one row per sample. Columns
    /// scanned after full rank is reached report `n`.
    pub rank_history: Vec<Vec<usize>>,
    pub samples: Vec<Vec<f64>>,
    /// Fixed difference step, or `None` for the point-adaptive default.
    pub h: Option<f64>,
    pub svd_tol: f64,
}

fn step_at(h: Option<f64>, x: &[f64]) -> f64 {
    h.unwrap_or_else(|| default_step(x))
}

/// Run the column deletion scan over `Q(x) = (b_1, …, b_m, ad_a b_1, …)`.
pub fn select_columns(
    a: &VectorField,
    bs: &[VectorField],
    samples: &[Vec<f64>],
    h: Option<f64>,
    svd_tol: f64,
) -> Result<ProbeReport> {
    if samples.is_empty() || bs.is_empty() {
        return Err(Error::InvalidArgument(
            "probe needs at least one field and one sample".into(),
        ));
    }
    let n = a.dim();
    if let Some(bad) = bs.iter().find(|b| b.dim() != n) {
        return Err(Error::InvalidArgument(format!(
            "input field has dimension {}, drift has {n}",
            bad.dim()
        )));
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "sample has dimension {}, fields have {n}",
            bad.len()
        )));
    }
    if let Some(h) = h {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "difference step must be positive, got {h}"
            )));
        }
    }
    let m = bs.len();
    let mut alive = vec![true; m];
    let mut kept = Vec::new();
    let mut kept_cols: Vec<Vec<Vec<f64>>> = vec![Vec::new(); samples.len()];
    let mut history: Vec<Vec<usize>> = vec![Vec::new(); samples.len()];
    let mut rank = 0;

    'scan: for s in 0..n {
        for j in 0..m {
            if rank == n {
                for row in history.iter_mut() {
                    row.push(n);
                }
                continue;
            }
            if !alive[j] {
                continue;
            }
            if s > MAX_BRACKET_ORDER {
                return Err(Error::CapExceeded(s));
            }
            let mut ranks = Vec::with_capacity(samples.len());
            let mut cols = Vec::with_capacity(samples.len());
            for (p, x) in samples.iter().enumerate() {
                let col = ad_raw(a, &bs[j], s, x, step_at(h, x));
                let mut trial = kept_cols[p].clone();
                trial.push(col.clone());
                ranks.push(numeric_rank(&trial, svd_tol));
                cols.push(col);
            }
            let column = history[0].len() + 1;
            for (row, &r) in history.iter_mut().zip(&ranks) {
                row.push(r);
            }
            let raised = ranks.iter().filter(|&&r| r > rank).count();
            if raised == samples.len() {
                rank += 1;
                kept.push((j + 1, s));
                for (p, col) in cols.into_iter().enumerate() {
                    kept_cols[p].push(col);
                }
            } else if raised == 0 {
                alive[j] = false;
            } else {
                return Err(Error::RegularityViolation { column, ranks });
            }
            if !alive.iter().any(|&v| v) {
                break 'scan;
            }
        }
    }
    if rank < n {
        return Err(Error::RankDeficient { rank, n });
    }
    let indices = (1..=m)
        .map(|j| kept.iter().filter(|(f, _)| *f == j).count())
        .collect();
    Ok(ProbeReport {
        kept,
        indices,
        rank_history: history,
        samples: samples.to_vec(),
        h,
        svd_tol,
    })
}

/// Which of the orthogonality / nonvanishing conditions a check covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiConditionKind {
    /// `(φ_i)_x · ad_a^k b_j = 0`.
    Orthogonal,
    /// `(φ_i)_x · ad_a^{n_i−1} b_i ≠ 0`.
    Nonvanishing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiCondition {
    pub kind: PhiConditionKind,
    /// One-based function index.
    pub i: usize,
    /// One-based field index.
    pub j: usize,
    pub k: usize,
    pub passed: bool,
    /// Largest |product| for orthogonality, smallest for nonvanishing.
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiCheck {
    pub conditions: Vec<PhiCondition>,
}

impl PhiCheck {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }
}

/// Gradient of a scalar function, `x ↦ ∇φ(x)`.
pub type Gradient = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Check the conditions a family `φ_1, …, φ_m` must meet to generate the
/// block change of variables, at every sample of the report.
pub fn verify_phi_conditions(
    phi_grads: &[Gradient],
    report: &ProbeReport,
    a: &VectorField,
    bs: &[VectorField],
    samples: &[Vec<f64>],
) -> Result<PhiCheck> {
    let m = report.indices.len();
    if phi_grads.len() != m || bs.len() != m {
        return Err(Error::InvalidArgument(format!(
            "{} gradients and {} fields for {m} blocks",
            phi_grads.len(),
            bs.len()
        )));
    }
    let ni = &report.indices;
    let mut conditions = Vec::new();
    let dot = |g: &[f64], v: &[f64]| g.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let norm = |v: &[f64]| v.iter().map(|p| p * p).sum::<f64>().sqrt();
    for i in 0..m {
        for j in 0..m {
            if ni[i] < 2 {
                continue;
            }
            let kmax = (ni[i] - 2).min(ni[j].saturating_sub(1));
            for k in 0..=kmax {
                let mut worst = 0.0f64;
                let mut passed = true;
                for x in samples {
                    let g = phi_grads[i](x);
                    let v = ad_pow(a, &bs[j], k, x, step_at(report.h, x))?;
                    let p = dot(&g, &v).abs();
                    worst = worst.max(p);
                    if p > 1e-5 * (norm(&g) * norm(&v)).max(1.0) {
                        passed = false;
                    }
                }
                conditions.push(PhiCondition {
                    kind: PhiConditionKind::Orthogonal,
                    i: i + 1,
                    j: j + 1,
                    k,
                    passed,
                    worst,
                });
            }
        }
        let k = ni[i] - 1;
        let mut worst = f64::INFINITY;
        for x in samples {
            let g = phi_grads[i](x);
            let v = ad_pow(a, &bs[i], k, x, step_at(report.h, x))?;
            worst = worst.min(dot(&g, &v).abs());
        }
        conditions.push(PhiCondition {
            kind: PhiConditionKind::Nonvanishing,
            i: i + 1,
            j: i + 1,
            k,
            passed: worst > report.svd_tol,
            worst,
        });
    }
    Ok(PhiCheck { conditions })
}
