//! Small numerical kernels shared by the scenarios and the simulator:
//! real cubic roots, a bracketed scalar root finder, and adaptive
//! Gauss-Kronrod quadrature.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Real roots of `u³ + p u + q = 0`, ascending, each polished by one
/// Newton step.
///
/// Uses the trigonometric form when the discriminant is negative (three
/// distinct real roots) and Cardano's formula otherwise.
pub fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if p == 0.0 {
        vec![(-q).cbrt()]
    } else if disc < 0.0 {
        // p < 0 here.
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (phi - 2.0 * PI * k as f64 / 3.0).cos())
            .collect()
    } else if disc == 0.0 {
        let r = (q / 2.0).cbrt();
        vec![-2.0 * r, r]
    } else {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    };
    for r in roots.iter_mut() {
        let f = (*r * *r + p) * *r + q;
        let df = 3.0 * *r * *r + p;
        if df != 0.0 {
            let step = f / df;
            if step.is_finite() {
                *r -= step;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Real roots of `a u³ + b u² + c u + d = 0` with `a != 0`, ascending.
pub fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let mut roots: Vec<f64> = depressed_cubic_roots(p, q)
        .into_iter()
        .map(|r| r - shift)
        .collect();
    for r in roots.iter_mut() {
        let f = ((*r + b) * *r + c) * *r + d;
        let df = (3.0 * *r + 2.0 * b) * *r + c;
        if df != 0.0 && (f / df).is_finite() {
            *r -= f / df;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Root of `f` on `[lo, hi]` by bisection with a secant acceleration
/// (Illinois variant of regula falsi). Endpoint roots are returned as is.
pub fn bracketed_root<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::RootBracketFailure { lo, hi });
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() <= tol {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= tol.max(4.0 * f64::EPSILON * a.abs().max(b.abs())) {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
    }
    Ok(0.5 * (a + b))
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K15: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WEIGHTS_G7: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_WEIGHTS_K15[7] * fc;
    let mut gauss = GK_WEIGHTS_G7[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kron += GK_WEIGHTS_K15[i] * s;
        if i % 2 == 1 {
            gauss += GK_WEIGHTS_G7[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive 7/15-point Gauss-Kronrod quadrature of `f` over `[a, b]`
/// to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol || depth >= 40 {
            return val;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, 0.5 * tol, depth + 1) + recurse(f, m, b, 0.5 * tol, depth + 1)
    }
    recurse(&f, a, b, tol, 0)
}
