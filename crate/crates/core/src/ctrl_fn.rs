//! Controllability function `Θ(x)` for one integrator chain and the
//! bounded feedback built on it.
//!
//! `Θ(x)` is the positive root of `2 a0 Θ = (N^{-1}(Θ) x, x)`. Multiplying
//! through by `Θ^{2k-1}` turns it into the polynomial equation
//!
//! ```text
//! 2 a0 Θ^{2k} = Σ_{i,j} (N^{-1}(1))_{ij} x_i x_j Θ^{i+j}      (0-based i, j)
//! ```
//!
//! whose left side minus right side changes sign exactly once on `(0, ∞)`.
//! The root is bracketed by doubling/halving from `Θ = 1` and then polished
//! with Newton steps that fall back to bisection whenever they leave the
//! bracket.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gramian::GramSet;

const MAX_BRACKET_STEPS: usize = 2200;
const MAX_POLISH_STEPS: usize = 200;

/// Upper admissible bound `2 d² / (N^{-1}(1) b0, b0)` on `a0`.
pub fn a0_max(gram: &GramSet, d: f64) -> f64 {
    2.0 * d * d / gram.inv_b0_quadratic()
}

/// The Θ-feedback law of one chain block.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSynth {
    gram: GramSet,
    a0: f64,
    d: f64,
    theta_min: f64,
    root_tol: f64,
}

/// Result of evaluating the controllability function at one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaEval {
    pub theta: f64,
    /// `N^{-1}(Θ) x`.
    pub w: Vec<f64>,
    /// `-½ b0* N^{-1}(Θ) x`.
    pub v: f64,
    /// `b0* N^{-1}(Θ) x`; its sign selects `S+`, `S-` or `S`.
    pub sigma: f64,
}

impl LinearSynth {
    pub const DEFAULT_THETA_MIN: f64 = 1e-9;
    pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

    pub fn new(gram: GramSet, a0: f64, d: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "control bound d = {d} must be positive"
            )));
        }
        let bound = a0_max(&gram, d);
        if !(a0 > 0.0 && a0 <= bound * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "a0 = {a0} outside (0, {bound}] for d = {d}"
            )));
        }
        Ok(Self {
            gram,
            a0,
            d,
            theta_min: Self::DEFAULT_THETA_MIN,
            root_tol: Self::DEFAULT_ROOT_TOL,
        })
    }

    /// Synthesis with `a0` at its admissible maximum.
    pub fn with_max_a0(gram: GramSet, d: f64) -> Result<Self> {
        let a0 = a0_max(&gram, d);
        Self::new(gram, a0, d)
    }

    /// Synthesis without a control bound, parameterised by `a0` only.
    /// The implied bound is `d = sqrt(a0 (N^{-1}(1) b0, b0) / 2)`.
    pub fn from_a0(gram: GramSet, a0: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "a0 = {a0} must be positive"
            )));
        }
        let d = (a0 * gram.inv_b0_quadratic() / 2.0).sqrt();
        Self::new(gram, a0, d)
    }

    pub fn with_theta_min(mut self, theta_min: f64) -> Result<Self> {
        if !(theta_min > 0.0) {
            return Err(Error::InvalidArgument("theta_min must be positive".into()));
        }
        self.theta_min = theta_min;
        Ok(self)
    }

    pub fn with_root_tol(mut self, root_tol: f64) -> Result<Self> {
        if !(root_tol > 0.0) {
            return Err(Error::InvalidArgument("root_tol must be positive".into()));
        }
        self.root_tol = root_tol;
        Ok(self)
    }

    pub fn gram(&self) -> &GramSet {
        &self.gram
    }

    pub fn k(&self) -> usize {
        self.gram.k()
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn theta_min(&self) -> f64 {
        self.theta_min
    }

    pub fn root_tol(&self) -> f64 {
        self.root_tol
    }

    /// `(N^{-1}(Θ) x, x)`.
    pub fn quadratic_form(&self, x: &[f64], theta: f64) -> f64 {
        let ninv = self.gram.gram_theta_inv(theta);
        let xv = DVector::from_column_slice(x);
        xv.dot(&(ninv * &xv))
    }

    /// Evaluate `Θ(x)`, `N^{-1}(Θ)x`, `v(x)` and `σ(x)`.
    pub fn theta_of(&self, x: &[f64]) -> Result<ThetaEval> {
        let k = self.k();
        if x.len() != k {
            return Err(Error::InvalidArgument(format!(
                "state has length {} but the chain has dimension {k}",
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonConvergence(format!("non-finite state {x:?}")));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Ok(ThetaEval {
                theta: 0.0,
                w: vec![0.0; k],
                v: 0.0,
                sigma: 0.0,
            });
        }
        let theta = self.solve_theta(x)?;
        let w = self.gram.gram_theta_inv(theta) * DVector::from_column_slice(x);
        let sigma = w[k - 1];
        Ok(ThetaEval {
            theta,
            w: w.as_slice().to_vec(),
            v: -0.5 * sigma,
            sigma,
        })
    }

    /// Feedback value with the near-origin hold band applied.
    pub fn v_of(&self, x: &[f64]) -> Result<f64> {
        let e = self.theta_of(x)?;
        Ok(if e.theta < self.theta_min { 0.0 } else { e.v })
    }

    /// Closed-loop vector field `A0 x + b0 v(x)`.
    pub fn closed_loop_rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let k = self.k();
        let v = self.v_of(x)?;
        let mut dx = vec![0.0; k];
        dx[..k - 1].copy_from_slice(&x[1..]);
        dx[k - 1] = v;
        Ok(dx)
    }

    /// Coefficients `c_p`, p = 0..=2k-2, of the right-hand polynomial.
    fn rhs_coefficients(&self, x: &[f64]) -> Vec<f64> {
        let k = self.k();
        let m = self.gram.n1_inv();
        let mut c = vec![0.0; 2 * k - 1];
        for i in 0..k {
            for j in 0..k {
                c[i + j] += m[(i, j)] * x[i] * x[j];
            }
        }
        c
    }

    fn solve_theta(&self, x: &[f64]) -> Result<f64> {
        let k = self.k();
        let c = self.rhs_coefficients(x);
        let lead = 2.0 * self.a0;
        // F(Θ) = 2 a0 Θ^{2k} - Σ c_p Θ^p and its derivative.
        let f = |t: f64| -> (f64, f64) {
            let mut p = 0.0;
            let mut dp = 0.0;
            for &cp in c.iter().rev() {
                dp = dp * t + p;
                p = p * t + cp;
            }
            let t2k1 = t.powi(2 * k as i32 - 1);
            (lead * t2k1 * t - p, 2.0 * k as f64 * lead * t2k1 - dp)
        };

        let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
        let f1 = f(1.0).0;
        if f1 == 0.0 {
            return Ok(1.0);
        }
        let mut steps = 0;
        if f1 > 0.0 {
            while f(lo).0 > 0.0 {
                hi = lo;
                lo *= 0.5;
                steps += 1;
                if steps > MAX_BRACKET_STEPS || lo == 0.0 {
                    return Err(Error::NonConvergence(format!(
                        "no lower bracket for x = {x:?}"
                    )));
                }
            }
        } else {
            while f(hi).0 < 0.0 {
                lo = hi;
                hi *= 2.0;
                steps += 1;
                if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
                    return Err(Error::NonConvergence(format!(
                        "no upper bracket for x = {x:?}"
                    )));
                }
            }
        }

        let mut t = 0.5 * (lo + hi);
        for _ in 0..MAX_POLISH_STEPS {
            let (ft, dft) = f(t);
            if ft == 0.0 {
                return Ok(t);
            }
            if ft < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(0.5 * (lo + hi));
            }
            let newton = t - ft / dft;
            if dft > 0.0 && newton > lo && newton < hi {
                if (newton - t).abs() <= 2.0 * f64::EPSILON * t {
                    return Ok(newton);
                }
                t = newton;
            } else if hi / lo > 4.0 {
                t = (lo * hi).sqrt();
            } else {
                t = 0.5 * (lo + hi);
            }
        }
        let t = 0.5 * (lo + hi);
        let g = 2.0 * self.a0 * t - self.quadratic_form(x, t);
        if g.abs() <= self.root_tol * (2.0 * self.a0 * t).max(1.0) {
            Ok(t)
        } else {
            Err(Error::NonConvergence(format!(
                "bracket [{lo:e}, {hi:e}] did not shrink for x = {x:?}"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn synth(k: usize, a0: f64) -> LinearSynth {
        LinearSynth::from_a0(GramSet::new(k).unwrap(), a0).unwrap()
    }

    #[test]
    fn a0_bounds() {
        assert_abs_diff_eq!(a0_max(&GramSet::new(1).unwrap(), 1.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            a0_max(&GramSet::new(2).unwrap(), 3f64.sqrt()),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(a0_max(&GramSet::new(2).unwrap(), 3.0), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_inadmissible_a0() {
        let g = GramSet::new(2).unwrap();
        assert!(LinearSynth::new(g.clone(), 1.5, 3f64.sqrt()).is_err());
        assert!(LinearSynth::new(g.clone(), 0.0, 1.0).is_err());
        assert!(LinearSynth::new(g, 1.0, 3f64.sqrt()).is_ok());
    }

    #[test]
    fn scalar_chain() {
        let e = synth(1, 1.0).theta_of(&[2.0]).unwrap();
        assert_abs_diff_eq!(e.theta, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.v, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn double_integrator_value() {
        // Bisection oracle on 2Θ⁴ = 36 (x1 = 1, x2 = 0) gives Θ = 18^{1/4}.
        let e = synth(2, 1.0).theta_of(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(e.theta, 18f64.powf(0.25), epsilon = 1e-13);
        assert_abs_diff_eq!(e.theta, 2.059767, epsilon = 1e-6);
        // v = -6/Θ² = -6/√18 = -√2; quoted elsewhere as ≈ -1.414370.
        assert_abs_diff_eq!(e.v, -2f64.sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(e.v, -1.414370, epsilon = 2e-4);
        assert_abs_diff_eq!(e.v, -6.0 / e.theta.powi(2), epsilon = 1e-14);
    }

    #[test]
    fn origin() {
        let e = synth(3, 0.5).theta_of(&[0.0; 3]).unwrap();
        assert_eq!((e.theta, e.v, e.sigma), (0.0, 0.0, 0.0));
    }

    #[test]
    fn closed_loop_examples() {
        let s = synth(2, 1.0);
        assert_eq!(s.closed_loop_rhs(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let r = s.closed_loop_rhs(&[1.0, 0.0]).unwrap();
        assert_eq!(r[0], 0.0);
        assert_abs_diff_eq!(r[1], -2f64.sqrt(), epsilon = 1e-13);
        let d = 0.7;
        let s1 = LinearSynth::new(GramSet::new(1).unwrap(), d * d, d).unwrap();
        assert_abs_diff_eq!(s1.closed_loop_rhs(&[-3.0]).unwrap()[0], d, epsilon = 1e-14);
        assert_abs_diff_eq!(s1.closed_loop_rhs(&[0.2]).unwrap()[0], -d, epsilon = 1e-14);
    }

    #[test]
    fn residual_within_tolerance_over_wide_scales() {
        let s = synth(3, 0.4);
        for scale in [1e-30, 1e-8, 1.0, 1e6, 1e30] {
            let x = [scale * 0.3, -scale * 1.2, scale * 0.05];
            let e = s.theta_of(&x).unwrap();
            let g = 2.0 * s.a0() * e.theta - s.quadratic_form(&x, e.theta);
            assert!(
                g.abs()
                    <= 1e-12
                        * (2.0 * s.a0() * e.theta)
                            .max(1.0)
                            .max(2.0 * s.a0() * e.theta),
                "scale {scale}: residual {g:e}"
            );
            assert!(g.abs() / (2.0 * s.a0() * e.theta) < 1e-12);
        }
    }

    #[test]
    fn hold_band_zeroes_feedback() {
        let s = synth(2, 1.0).with_theta_min(1e-3).unwrap();
        assert_eq!(s.v_of(&[1e-9, 0.0]).unwrap(), 0.0);
        assert!(s.v_of(&[1.0, 0.0]).unwrap() < 0.0);
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let s = synth(2, 1.0);
        assert!(s.theta_of(&[1.0]).is_err());
        assert!(matches!(
            s.theta_of(&[f64::NAN, 0.0]),
            Err(Error::NonConvergence(_))
        ));
    }
}
