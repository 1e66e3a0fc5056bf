use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use super::alpha::{concavity_violation, AlphaSequence};
use crate::error::{Result, SmprError};
use crate::marginals::{binomial, exact, to_f64};
use crate::orthopoly::CoeffMatrix;

/// `E(X_{τ+t} - X_τ)^{2k} = Σ_{n=1}^{k} D_n (1 - e^{-α_n t})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementExpansion {
    pub k: usize,
    /// `D_1 ..= D_k`.
    pub d: Vec<f64>,
    /// Exact `D_n`, available when the coefficients came from exact moments.
    #[serde(skip)]
    exact: Option<Vec<BigRational>>,
}

/// Coefficients `D_n = -Σ_j (-1)^j binom(2k, j) c_{j,n} c_{2k-j,n}`.
pub fn increment_expansion(c: &CoeffMatrix, k: usize) -> Result<IncrementExpansion> {
    if k == 0 {
        return Err(SmprError::InvalidParameter("k must be at least 1".into()));
    }
    if c.order() < 2 * k {
        return Err(SmprError::OutOfRange { index: 2 * k, max: c.order() });
    }
    if let Some(f) = c.exact() {
        let exact: Vec<BigRational> = (1..=k)
            .map(|n| {
                let mut acc = BigRational::zero();
                for j in n..=2 * k - n {
                    let term = BigRational::from_integer(binomial_big(2 * k, j)) * f.product(j, 2 * k - j, n);
                    if j % 2 == 0 {
                        acc -= term;
                    } else {
                        acc += term;
                    }
                }
                acc
            })
            .collect();
        let d = exact.iter().map(to_f64).collect();
        return Ok(IncrementExpansion { k, d, exact: Some(exact) });
    }
    let d = (1..=k)
        .map(|n| {
            -(n..=2 * k - n)
                .map(|j| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(2 * k, j) * c.get(j, n) * c.get(2 * k - j, n)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(IncrementExpansion { k, d, exact: None })
}

impl IncrementExpansion {
    /// `D_n` for `1 <= n <= k`.
    pub fn coefficient(&self, n: usize) -> f64 {
        self.d[n - 1]
    }

    /// The `t -> ∞` limit `Σ D_n`.
    pub fn limit(&self) -> f64 {
        self.d.iter().sum()
    }

    /// Evaluates with rates `α_1 ..= α_k`.
    ///
    /// The exponential form cancels badly when `t` is small and the low
    /// Taylor coefficients vanish. With exact `D_n` and `max α_n t <= 1` the
    /// Taylor series is summed instead, its coefficients `Σ D_n α_n^s`
    /// computed exactly.
    pub fn eval_rates(&self, rates: &[f64], t: f64) -> f64 {
        let amax = rates.iter().take(self.k).fold(0.0f64, |m, a| m.max(a.abs()));
        match &self.exact {
            Some(exact) if t > 0.0 && amax * t <= 1.0 => exact_taylor_sum(exact, rates, t),
            _ => self.d.iter().zip(rates).map(|(d, a)| -d * (-a * t).exp_m1()).sum(),
        }
    }

    pub fn eval(&self, alpha: &AlphaSequence, t: f64) -> Result<f64> {
        let rates = alpha.rates(self.k)?;
        Ok(self.eval_rates(&rates[1..], t))
    }

    /// Taylor coefficients of `t^1 ..= t^order`:
    /// `(-1)^{s-1}/s! · Σ_n D_n α_n^s`.
    pub fn taylor(&self, rates: &[f64], order: usize) -> Vec<f64> {
        let mut fact = 1.0;
        (1..=order)
            .map(|s| {
                fact *= s as f64;
                let sign = if s % 2 == 1 { 1.0 } else { -1.0 };
                sign / fact * power_sum(&self.d, rates, s)
            })
            .collect()
    }

    /// `max_s |Σ D_n α_n^s| / Σ |D_n α_n^s|` over `s = 1 ..= order`.
    pub fn relative_taylor_residual(&self, rates: &[f64], order: usize) -> f64 {
        (1..=order)
            .map(|s| {
                let scale: f64 = self.d.iter().zip(rates).map(|(d, a)| (d * a.powi(s as i32)).abs()).sum();
                power_sum(&self.d, rates, s).abs() / scale.max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

fn exact_taylor_sum(d: &[BigRational], rates: &[f64], t: f64) -> f64 {
    let a: Vec<BigRational> = rates.iter().take(d.len()).map(|&x| exact(x)).collect();
    let mut pw: Vec<BigRational> = vec![BigRational::one(); a.len()];
    let scale: f64 = d.iter().map(|x| to_f64(x).abs()).sum();
    let amax = rates.iter().take(d.len()).fold(0.0f64, |m, x| m.max(x.abs()));
    let mut sum = 0.0;
    let mut tpow = 1.0;
    for s in 1..=MAX_TAYLOR_TERMS {
        let mut p = BigRational::zero();
        for n in 0..a.len() {
            pw[n] = &pw[n] * &a[n];
            p += &d[n] * &pw[n];
        }
        tpow *= t / s as f64;
        let term = to_f64(&p) * tpow;
        sum += if s % 2 == 1 { term } else { -term };
        // later terms are bounded by Σ|D_n| (max α t)^s / s!
        let bound = scale * amax.powi(s as i32) * tpow;
        if s >= d.len() && bound <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

const MAX_TAYLOR_TERMS: usize = 60;

fn binomial_big(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn power_sum(d: &[f64], rates: &[f64], s: usize) -> f64 {
    d.iter().zip(rates).map(|(d, a)| d * a.powi(s as i32)).sum()
}

/// Result of [`solve_alpha`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub k: usize,
    /// `ρ_2` forced at `k = 2`, i.e. `-D_1 / D_2` of the fourth-moment expansion.
    pub continuity_coefficient: f64,
    /// Primary solution `ρ_1 ..= ρ_k`: among positive roots, concave ones
    /// are preferred, then the smallest `ρ_2`.
    pub ratios: Vec<f64>,
    /// Every distinct root found from the starting list. Not claimed exhaustive.
    pub roots: Vec<AlphaRoot>,
    /// Vanishing Taylor orders `r = k - 1`.
    pub order: usize,
    /// Hölder exponent bound `r / (2k)`.
    pub holder_bound: f64,
    /// Relative size of the Taylor coefficients through `t^r` at the primary root.
    pub taylor_residual: f64,
    pub expansion: IncrementExpansion,
}

/// One root of the continuity system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRoot {
    /// `ρ_1 ..= ρ_k`.
    pub ratios: Vec<f64>,
    pub positive: bool,
    /// `2ρ_m >= ρ_{m-1} + ρ_{m+1}` with `ρ_0 = 0`.
    pub concave: bool,
}

const NEWTON_ITERATIONS: usize = 200;
const ACCEPT_RESIDUAL: f64 = 1e-10;
const DISTINCT_ROOTS: f64 = 1e-7;

/// Solves `Σ_n D_n ρ_n^s = 0`, `s = 1 ..= k-1`, for `ρ_2 ..= ρ_k` (with
/// `ρ_1 = 1`) by damped Newton from a fixed list of starting points.
pub fn solve_alpha(c: &CoeffMatrix, k: usize) -> Result<ContinuityReport> {
    if k < 2 {
        return Err(SmprError::InvalidParameter("solve_alpha needs k >= 2".into()));
    }
    let exp = increment_expansion(c, k)?;
    let quartic = increment_expansion(c, 2)?;
    if quartic.d[1].abs() <= 1e-14 * quartic.d[0].abs() {
        return Err(SmprError::Degenerate("two-point-like marginal: c_22 vanishes".into()));
    }
    let continuity_coefficient = -quartic.d[0] / quartic.d[1];

    let mut roots: Vec<Vec<f64>> = Vec::new();
    for start in starting_points(k) {
        if let Some(root) = newton(&exp.d, start) {
            if !roots.iter().any(|r| same_root(r, &root)) {
                roots.push(root);
            }
        }
    }
    if roots.is_empty() {
        return Err(SmprError::NoConvergence(format!("no starting point converged for k = {k}")));
    }
    let mut roots: Vec<AlphaRoot> = roots
        .into_iter()
        .map(|ratios| {
            let positive = ratios.iter().all(|&x| x > 0.0);
            let rates: Vec<f64> = std::iter::once(0.0).chain(ratios.iter().copied()).collect();
            let concave = concavity_violation(&rates).is_none();
            AlphaRoot { ratios, positive, concave }
        })
        .collect();
    roots.sort_by(|a, b| a.ratios[1..].partial_cmp(&b.ratios[1..]).unwrap_or(std::cmp::Ordering::Equal));
    // concave roots first, then the smallest ρ_2
    let primary = roots
        .iter()
        .filter(|r| r.positive)
        .min_by(|a, b| b.concave.cmp(&a.concave).then(a.ratios[1].total_cmp(&b.ratios[1])))
        .map(|r| r.ratios.clone())
        .ok_or_else(|| {
            SmprError::NoPositiveSolution(format!(
                "{} root(s) found, none positive: {:?}",
                roots.len(),
                roots.iter().map(|r| &r.ratios).collect::<Vec<_>>()
            ))
        })?;
    let order = k - 1;
    let taylor_residual = exp.relative_taylor_residual(&primary, order);
    Ok(ContinuityReport {
        k,
        continuity_coefficient,
        ratios: primary,
        roots,
        order,
        holder_bound: order as f64 / (2 * k) as f64,
        taylor_residual,
        expansion: exp,
    })
}

fn same_root(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DISTINCT_ROOTS * (1.0 + y.abs()))
}

/// Harness first, then the other named families, then power laws.
fn starting_points(k: usize) -> Vec<Vec<f64>> {
    let named: [fn(f64) -> f64; 3] = [|n| n, |n| n * n, |n| n * (n + 2.0) / 3.0];
    let mut starts: Vec<Vec<f64>> = named.iter().map(|f| (1..=k).map(|n| f(n as f64)).collect()).collect();
    for p in [-2.0, -1.0, -0.5, 0.25, 0.5, 0.75, 1.25, 1.5, 2.5, 3.0] {
        starts.push((1..=k).map(|n| (n as f64).powf(p)).collect());
    }
    starts
}

/// Damped Newton on the scaled system; returns `ρ_1 ..= ρ_k` on success.
fn newton(d: &[f64], mut rho: Vec<f64>) -> Option<Vec<f64>> {
    let k = d.len();
    let m = k - 1;
    let weight = d.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let residual = |rho: &[f64]| -> DVector<f64> {
        DVector::from_fn(m, |s, _| power_sum(d, rho, s + 1) / weight)
    };
    let relative = |rho: &[f64]| -> f64 {
        (1..=m)
            .map(|s| {
                let scale: f64 = d.iter().zip(rho).map(|(d, a)| (d * a.powi(s as i32)).abs()).sum();
                power_sum(d, rho, s).abs() / scale.max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    };
    let mut f = residual(&rho);
    for _ in 0..NEWTON_ITERATIONS {
        if relative(&rho) < 1e-14 {
            break;
        }
        // J[s][n] = s D_n ρ_n^{s-1} / weight for unknowns n = 2..k
        let jac = DMatrix::from_fn(m, m, |s, col| {
            let n = col + 1;
            (s + 1) as f64 * d[n] * rho[n].powi(s as i32) / weight
        });
        let step = jac.lu().solve(&(-&f))?;
        let norm = f.norm();
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = std::iter::once(1.0)
                .chain((0..m).map(|i| rho[i + 1] + lambda * step[i]))
                .collect();
            let ft = residual(&trial);
            if ft.iter().all(|x| x.is_finite()) && ft.norm() < norm {
                rho = trial;
                f = ft;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (relative(&rho) < ACCEPT_RESIDUAL && rho.iter().all(|x| x.is_finite())).then_some(rho)
}
