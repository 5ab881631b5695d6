//! Chain-of-integrators matrices and the weighted Gramian family.
//!
//! For the chain `x' = A0 x + b0 v` in dimension `k`, `A0` is the nilpotent
//! upper shift and `b0 = e_k`. Every matrix here has a closed form because
//! `e^{-A0 t} b0` is a polynomial in `t`:
//!
//! ```text
//! (e^{-A0 t} b0)_i = (-t)^{k-i} / (k-i)!        (1-based i)
//! N(Θ)  = ∫_0^Θ (1 - t/Θ) e^{-A0 t} b0 b0* e^{-A0* t} dt
//! N̂(Θ) = (1/Θ)   ∫_0^Θ e^{-A0 t} b0 b0* e^{-A0* t} dt
//! Ñ(Θ)  = (1/Θ²) ∫_0^Θ t e^{-A0 t} b0 b0* e^{-A0* t} dt
//! ```
//!
//! `N(1)` and its inverse are computed in exact rational arithmetic and
//! rounded once to `f64`. `N(Θ)` for other Θ follows from the dilation
//! `D(Θ) N(Θ) D(Θ) = N(1)` with `D(Θ) = diag(Θ^{-(2k-2j+1)/2})`.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest supported chain dimension.
pub const MAX_CHAIN_DIM: usize = 16;

/// Residual bound on `N(1) N(1)^{-1} - I` above which construction fails.
pub const INVERSION_RESIDUAL_LIMIT: f64 = 1e-10;

/// Dimension of one integrator chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChainDim(usize);

impl ChainDim {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_CHAIN_DIM {
            return Err(Error::DimensionOutOfRange(k));
        }
        Ok(Self(k))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Upper shift matrix `A0` of the chain.
pub fn shift_matrix(k: ChainDim) -> DMatrix<f64> {
    let k = k.get();
    DMatrix::from_fn(k, k, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// Input vector `b0 = e_k`.
pub fn input_vector(k: ChainDim) -> DVector<f64> {
    let k = k.get();
    DVector::from_fn(k, |i, _| if i + 1 == k { 1.0 } else { 0.0 })
}

/// `e^{-A0 t} b0`, evaluated through the nilpotent series.
pub fn expm_chain_b(k: ChainDim, t: f64) -> DVector<f64> {
    let k = k.get();
    DVector::from_fn(k, |i, _| {
        let p = (k - 1 - i) as i32;
        (-t).powi(p) / factorial(p as u32)
    })
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, m| acc * f64::from(m))
}

fn big_factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, m| acc * BigInt::from(m))
}

/// Exact `N(1)[i][j]` with `p = k-i`, `q = k-j` (1-based).
fn n1_entry_exact(p: usize, q: usize) -> BigRational {
    let s = p + q;
    let sign = if s.is_multiple_of(2) {
        BigInt::one()
    } else {
        -BigInt::one()
    };
    // 1/(s+1) - 1/(s+2) = 1/((s+1)(s+2))
    let denom = big_factorial(p) * big_factorial(q) * BigInt::from((s + 1) * (s + 2));
    BigRational::new(sign, denom)
}

/// Gauss-Jordan inversion over the rationals. Pivots on the largest
/// magnitude entry of each column so that the elimination order matches
/// the floating-point routine it replaces.
fn invert_exact(mut a: Vec<Vec<BigRational>>) -> Option<Vec<Vec<BigRational>>> {
    let n = a.len();
    let mut inv: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .max_by(|&r, &s| a[r][col].abs().cmp(&a[s][col].abs()))?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = &a[col][j] / &p;
            inv[col][j] = &inv[col][j] / &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                let t = &f * &a[col][j];
                a[r][j] = &a[r][j] - t;
                let t = &f * &inv[col][j];
                inv[r][j] = &inv[r][j] - t;
            }
        }
    }
    Some(inv)
}

/// Normwise backward error `|N X - I| / (|N| |X|)` (infinity norms) of the
/// pair after symmetric diagonal balancing of `N`. Balancing strips the
/// factorial scaling so that only the intrinsic conditioning is measured.
fn backward_error(n: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let k = n.nrows();
    let s = DVector::from_fn(k, |i, _| n[(i, i)].sqrt().recip());
    let nb = DMatrix::from_fn(k, k, |i, j| n[(i, j)] * s[i] * s[j]);
    let xb = DMatrix::from_fn(k, k, |i, j| x[(i, j)] / (s[i] * s[j]));
    let inf_norm = |m: &DMatrix<f64>| {
        m.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let r = &nb * &xb - DMatrix::<f64>::identity(k, k);
    inf_norm(&r) / (inf_norm(&nb) * inf_norm(&xb))
}

/// Precomputed `N(1)`, `N(1)^{-1}` and dilation exponents for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSet {
    k: ChainDim,
    n1: DMatrix<f64>,
    n1_inv: DMatrix<f64>,
    dil: DVector<f64>,
    inversion_residual: f64,
}

/// Build the Gramian set for a chain of dimension `k`.
pub fn gram_n1(k: ChainDim) -> Result<GramSet> {
    let kk = k.get();
    let exact: Vec<Vec<BigRational>> = (0..kk)
        .map(|i| {
            (0..kk)
                .map(|j| n1_entry_exact(kk - 1 - i, kk - 1 - j))
                .collect()
        })
        .collect();
    let inv_exact = invert_exact(exact.clone()).ok_or(Error::IllConditioned {
        k: kk,
        residual: f64::INFINITY,
    })?;
    let to_f64 = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
    let n1 = DMatrix::from_fn(kk, kk, |i, j| to_f64(&exact[i][j]));
    let n1_inv = DMatrix::from_fn(kk, kk, |i, j| to_f64(&inv_exact[i][j]));
    let residual = backward_error(&n1, &n1_inv);
    if !(residual <= INVERSION_RESIDUAL_LIMIT) {
        return Err(Error::IllConditioned { k: kk, residual });
    }
    let dil = DVector::from_fn(kk, |j, _| (2 * kk - 2 * j - 1) as f64 / 2.0);
    Ok(GramSet {
        k,
        n1,
        n1_inv,
        dil,
        inversion_residual: residual,
    })
}

impl GramSet {
    pub fn new(k: usize) -> Result<Self> {
        gram_n1(ChainDim::new(k)?)
    }

    pub fn dim(&self) -> ChainDim {
        self.k
    }

    pub fn k(&self) -> usize {
        self.k.get()
    }

    /// `N(1)`.
    pub fn n1(&self) -> &DMatrix<f64> {
        &self.n1
    }

    /// `N(1)^{-1}`.
    pub fn n1_inv(&self) -> &DMatrix<f64> {
        &self.n1_inv
    }

    /// Dilation exponents `(2k - 2j + 1)/2`, j = 1..k.
    pub fn dilation_exponents(&self) -> &DVector<f64> {
        &self.dil
    }

    /// Balanced normwise backward error of the stored `(N(1), N(1)^{-1})` pair.
    pub fn inversion_residual(&self) -> f64 {
        self.inversion_residual
    }

    /// `(N(1)^{-1} b0, b0)`, the last diagonal entry of the inverse.
    pub fn inv_b0_quadratic(&self) -> f64 {
        let k = self.k();
        self.n1_inv[(k - 1, k - 1)]
    }

    /// Diagonal of `D(Θ) = diag(Θ^{-(2k-2j+1)/2})`.
    pub fn dilation(&self, theta: f64) -> DVector<f64> {
        self.dil.map(|e| theta.powf(-e))
    }

    /// `N(Θ)[i][j] = Θ^{2k-i-j+1} N(1)[i][j]` (1-based exponents).
    pub fn gram_theta(&self, theta: f64) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |i, j| {
            theta.powi((2 * k - i - j - 1) as i32) * self.n1[(i, j)]
        })
    }

    /// `N(Θ)^{-1} = D(Θ) N(1)^{-1} D(Θ)`.
    pub fn gram_theta_inv(&self, theta: f64) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |i, j| {
            theta.powi(-((2 * k - i - j - 1) as i32)) * self.n1_inv[(i, j)]
        })
    }

    /// `N̂(Θ)[i][j] = (-1)^{p+q} Θ^{p+q} / (p! q! (p+q+1))`.
    pub fn gram_hat(&self, theta: f64) -> DMatrix<f64> {
        self.moment_matrix(theta, 1)
    }

    /// `Ñ(Θ)[i][j] = (-1)^{p+q} Θ^{p+q} / (p! q! (p+q+2))`.
    pub fn gram_tilde(&self, theta: f64) -> DMatrix<f64> {
        self.moment_matrix(theta, 2)
    }

    fn moment_matrix(&self, theta: f64, shift: usize) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |i, j| {
            let (p, q) = (k - 1 - i, k - 1 - j);
            let s = p + q;
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            sign * theta.powi(s as i32)
                / (factorial(p as u32) * factorial(q as u32) * (s + shift) as f64)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k(n: usize) -> ChainDim {
        ChainDim::new(n).unwrap()
    }

    #[test]
    fn expm_values() {
        assert_eq!(expm_chain_b(k(1), 5.0).as_slice(), &[1.0]);
        assert_eq!(expm_chain_b(k(2), 1.0).as_slice(), &[-1.0, 1.0]);
        assert_eq!(expm_chain_b(k(3), 2.0).as_slice(), &[2.0, -2.0, 1.0]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert_eq!(ChainDim::new(0), Err(Error::DimensionOutOfRange(0)));
        assert_eq!(ChainDim::new(17), Err(Error::DimensionOutOfRange(17)));
        assert!(ChainDim::new(16).is_ok());
    }

    #[test]
    fn small_closed_forms() {
        let g1 = gram_n1(k(1)).unwrap();
        assert_abs_diff_eq!(g1.n1()[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g1.n1_inv()[(0, 0)], 2.0, epsilon = 1e-15);

        let g2 = gram_n1(k(2)).unwrap();
        let want = [[1.0 / 12.0, -1.0 / 6.0], [-1.0 / 6.0, 0.5]];
        let want_inv = [[36.0, 12.0], [12.0, 6.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(g2.n1()[(i, j)], want[i][j], epsilon = 1e-15);
                assert_abs_diff_eq!(g2.n1_inv()[(i, j)], want_inv[i][j], epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(g2.inv_b0_quadratic(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn theta_scaling() {
        let g1 = gram_n1(k(1)).unwrap();
        assert_abs_diff_eq!(g1.gram_theta(4.0)[(0, 0)], 2.0, epsilon = 1e-15);
        let g2 = gram_n1(k(2)).unwrap();
        assert_eq!(g2.gram_theta(1.0), g2.n1().clone());
        let n2 = g2.gram_theta(2.0);
        let want = [[8.0 / 12.0, -4.0 / 6.0], [-4.0 / 6.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(n2[(i, j)], want[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn hat_and_tilde() {
        let g1 = gram_n1(k(1)).unwrap();
        assert_eq!(g1.gram_hat(1.0)[(0, 0)], 1.0);
        assert_eq!(g1.gram_tilde(1.0)[(0, 0)], 0.5);
        let g2 = gram_n1(k(2)).unwrap();
        let hat = g2.gram_hat(1.0);
        let want = [[1.0 / 3.0, -0.5], [-0.5, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(hat[(i, j)], want[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn inverse_from_dilation_matches_direct() {
        let g = gram_n1(k(4)).unwrap();
        for theta in [0.3, 2.5] {
            let prod = g.gram_theta(theta) * g.gram_theta_inv(theta);
            assert!((prod - DMatrix::<f64>::identity(4, 4)).amax() < 1e-9);
        }
    }

    #[test]
    fn large_chains_build_or_report_conditioning() {
        for n in 1..=MAX_CHAIN_DIM {
            match gram_n1(k(n)) {
                Ok(g) => assert!(g.inversion_residual() <= INVERSION_RESIDUAL_LIMIT),
                Err(Error::IllConditioned { residual, .. }) => {
                    assert!(n >= 12, "k = {n} should be well conditioned");
                    assert!(residual > INVERSION_RESIDUAL_LIMIT);
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }
}
