//! Odd-power chain `ẋ_j = u^{2j−1}`, `|u| ≤ d`.
//!
//! With `P_i(u) = u ∏_{k≤n−i} (u² − λ_k²)` the change of variables
//! `z_i = x_{n−i+1} + Σ c_k^{(i)} x_k` gives `ż_i = P_i(u)`. Step `i` holds
//! `u = ∓λ_{n+1−i}`, a common root of `P_1, …, P_{i−1}`, so earlier
//! coordinates stay frozen.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{const_gradient, ProbeFields, Scenario};
use crate::error::{Error, Result};
use crate::mappability::VectorField;
use crate::stepwise::{BlockPartition, BlockSystem, ConstSign, StepPolicy};

/// Levels `λ_1 < … < λ_{n−1}`, the first-step level `α` and the bound `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyOddOptions {
    pub lambdas: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub d: f64,
}

impl Default for PolyOddOptions {
    fn default() -> Self {
        Self {
            lambdas: None,
            alpha: None,
            d: 1.0,
        }
    }
}

impl PolyOddOptions {
    /// Read `d`, `alpha` and `lambda1 … lambda{n−1}` from a parameter map.
    pub fn from_params(n: usize, params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut opts = Self::default();
        let mut lambdas = vec![None; n.saturating_sub(1)];
        for (k, &v) in params {
            match k.as_str() {
                "d" => opts.d = v,
                "alpha" => opts.alpha = Some(v),
                _ => {
                    let idx = k
                        .strip_prefix("lambda")
                        .and_then(|s| s.parse::<usize>().ok())
                        .filter(|&i| i >= 1 && i < n)
                        .ok_or_else(|| {
                            Error::InvalidArgument(format!(
                                "scenario polyodd:{n} has no parameter `{k}` (known: d, alpha, lambda1..lambda{})",
                                n.saturating_sub(1)
                            ))
                        })?;
                    lambdas[idx - 1] = Some(v);
                }
            }
        }
        if lambdas.iter().any(Option::is_some) {
            if lambdas.iter().any(Option::is_none) {
                return Err(Error::InvalidArgument(format!(
                    "either all of lambda1..lambda{} or none must be given",
                    n - 1
                )));
            }
            opts.lambdas = Some(lambdas.into_iter().flatten().collect());
        }
        Ok(opts)
    }

    fn resolved(&self, n: usize) -> Result<(Vec<f64>, f64)> {
        let d = self.d;
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bound d must be positive, got {d}"
            )));
        }
        let lambdas = match &self.lambdas {
            Some(l) => {
                if l.len() != n - 1 {
                    return Err(Error::InvalidArgument(format!(
                        "expected {} lambdas, got {}",
                        n - 1,
                        l.len()
                    )));
                }
                let increasing = l.windows(2).all(|w| w[0] < w[1]);
                if !increasing
                    || l.first().is_some_and(|&v| v <= 0.0)
                    || l.last().is_some_and(|&v| v >= d)
                {
                    return Err(Error::InvalidArgument(format!(
                        "lambdas must satisfy 0 < λ_1 < … < λ_(n-1) < d = {d}, got {l:?}"
                    )));
                }
                l.clone()
            }
            None => (1..n).map(|k| k as f64 / n as f64 * d).collect(),
        };
        let alpha = self.alpha.unwrap_or(d);
        if !(alpha > 0.0 && alpha <= d) || lambdas.contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, d] and differ from every lambda, got {alpha}"
            )));
        }
        Ok((lambdas, alpha))
    }
}

fn check_index(n: usize, i: usize) -> Result<()> {
    if n < 1 || i < 1 || i > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 ≤ i ≤ n, got i = {i}, n = {n}"
        )));
    }
    Ok(())
}

/// Expand `∏ (w − r_k)` into ascending coefficients.
fn expand<T>(roots: &[T]) -> Vec<T>
where
    T: Clone + Zero + One + std::ops::Sub<Output = T> + std::ops::Mul<Output = T>,
{
    let mut c = vec![T::one()];
    for r in roots {
        let mut next = vec![T::zero(); c.len() + 1];
        for (j, cj) in c.iter().enumerate() {
            next[j + 1] = next[j + 1].clone() + cj.clone();
            next[j] = next[j].clone() - r.clone() * cj.clone();
        }
        c = next;
    }
    c
}

/// Coefficients `c_1^{(i)}, …, c_{n−i}^{(i)}` of `u, u³, …, u^{2(n−i)−1}` in
/// `P_i`; the leading coefficient is 1. Default levels are `λ_k = k/n`.
pub fn polyodd_coeffs(n: usize, i: usize, lambdas: Option<&[f64]>) -> Result<Vec<f64>> {
    check_index(n, i)?;
    let default: Vec<f64>;
    let lambdas = match lambdas {
        Some(l) => l,
        None => {
            default = (1..n).map(|k| k as f64 / n as f64).collect();
            &default
        }
    };
    if lambdas.len() + 1 < n {
        return Err(Error::InvalidArgument(format!(
            "need {} lambdas, got {}",
            n - 1,
            lambdas.len()
        )));
    }
    let sq: Vec<f64> = lambdas[..n - i].iter().map(|l| l * l).collect();
    let mut c = expand(&sq);
    c.pop();
    Ok(c)
}

/// Exact coefficients of `P_i` for the default levels `k/n`.
pub fn polyodd_coeffs_exact(n: usize, i: usize) -> Result<Vec<BigRational>> {
    check_index(n, i)?;
    let sq: Vec<BigRational> = (1..=n - i)
        .map(|k| BigRational::new(BigInt::from(k * k), BigInt::from(n * n)))
        .collect();
    let mut c = expand(&sq);
    c.pop();
    Ok(c)
}

/// Every root of `P_{i+1}` is a root of `P_i`, checked in exact arithmetic
/// for the default levels.
pub fn roots_nested_exact(n: usize) -> Result<bool> {
    let eval = |coeffs: &[BigRational], u: &BigRational| -> BigRational {
        // P(u) = u^{2L+1} + Σ c_k u^{2k−1}, L = coeffs.len().
        let u2 = u * u;
        let mut acc = BigRational::one();
        for c in coeffs.iter().rev() {
            acc = acc * &u2 + c;
        }
        acc * u
    };
    for i in 1..n {
        let ci = polyodd_coeffs_exact(n, i)?;
        let mut roots = vec![BigRational::zero()];
        for k in 1..=(n - i - 1) {
            let r = BigRational::new(BigInt::from(k), BigInt::from(n));
            roots.push(-r.clone());
            roots.push(r);
        }
        if roots.iter().any(|r| !eval(&ci, r).is_zero()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `P_i(u)` in product form.
fn p_eval(i: usize, n: usize, lambdas: &[f64], u: f64) -> f64 {
    lambdas[..n - i]
        .iter()
        .fold(u, |acc, l| acc * (u * u - l * l))
}

/// Analytic `T_1, …, T_n` by the piecewise-linear recursion.
pub fn polyodd_schedule(z0: &[f64], lambdas: &[f64], levels: &[f64]) -> Vec<f64> {
    let n = z0.len();
    let mut z = z0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let zi = z[i - 1];
        if zi != 0.0 {
            let u = -levels[i - 1] * zi.signum();
            let dt = (zi / p_eval(i, n, lambdas, u)).abs();
            for k in 1..=n {
                z[k - 1] += p_eval(k, n, lambdas, u) * dt;
            }
            z[i - 1] = 0.0;
            t += dt;
        }
        out.push(t);
    }
    out
}

pub fn polyodd(n: usize, opts: &PolyOddOptions) -> Result<Scenario> {
    if !(2..=12).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "polyodd dimension must be in 2..=12, got {n}"
        )));
    }
    let (lambdas, alpha) = opts.resolved(n)?;
    let coeffs: Vec<Vec<f64>> = (1..=n)
        .map(|i| polyodd_coeffs(n, i, Some(&lambdas)))
        .collect::<Result<_>>()?;
    let levels: Vec<f64> = (1..=n)
        .map(|i| if i == 1 { alpha } else { lambdas[n - i] })
        .collect();

    let c = coeffs.clone();
    let to_z = move |x: &[f64]| -> Vec<f64> {
        (1..=n)
            .map(|i| x[n - i] + c[i - 1].iter().zip(x).map(|(ck, xk)| ck * xk).sum::<f64>())
            .collect()
    };
    let c = coeffs.clone();
    let from_z = move |z: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; n];
        x[0] = z[n - 1];
        for i in 2..=n {
            let ci = &c[n - i];
            x[i - 1] = z[n - i]
                - ci.iter()
                    .zip(&x[..i - 1])
                    .map(|(ck, xk)| ck * xk)
                    .sum::<f64>();
        }
        x
    };
    let dynamics = move |_: &[f64], u: f64| -> Vec<f64> {
        (1..=n).map(|j| u.powi(2 * j as i32 - 1)).collect()
    };
    let lam = lambdas.clone();
    let residual =
        move |_: &[f64], u: f64| -> Vec<f64> { (1..=n).map(|i| p_eval(i, n, &lam, u)).collect() };

    let mut params = BTreeMap::new();
    params.insert("n".into(), n as f64);
    params.insert("d".into(), opts.d);
    params.insert("alpha".into(), alpha);
    for (k, l) in lambdas.iter().enumerate() {
        params.insert(format!("lambda{}", k + 1), *l);
    }
    let (lam, lev) = (lambdas.clone(), levels.clone());
    let phi_grads = (1..=n)
        .map(|i| {
            let mut g = vec![0.0; n];
            g[n - i] = 1.0;
            for (k, ck) in coeffs[i - 1].iter().enumerate() {
                g[k] += ck;
            }
            const_gradient(g)
        })
        .collect();
    Ok(Scenario {
        name: format!("polyodd:{n}"),
        n,
        dynamics: Arc::new(dynamics),
        to_z: Arc::new(to_z),
        from_z: Arc::new(from_z),
        system: BlockSystem::new(BlockPartition::new(vec![1; n])?, Arc::new(residual)),
        policies: levels
            .iter()
            .map(|&l| StepPolicy::ConstSign(ConstSign::symmetric(l)))
            .collect(),
        params,
        analytic_schedule: Some(Arc::new(move |z: &[f64]| {
            Ok(polyodd_schedule(z, &lam, &lev))
        })),
        probe: ProbeFields {
            a: VectorField::zero(n),
            bs: (1..=n).map(|i| VectorField::unit(n, n - i)).collect(),
            phi_grads,
        },
    })
}
