//! Numerical integration.
//!
//! Two tools: double-exponential rules (tanh-sinh, exp-sinh, sinh-sinh) for
//! integrating densities that may be singular at finite endpoints, and Gauss
//! rules built from three-term recurrence coefficients (Golub-Welsch) for
//! integrals against a marginal law.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, SymmetricEigen};

const MAX_LEVEL: usize = 12;

fn refine<F>(mut level_sum: F, tol: f64) -> f64
where
    F: FnMut(f64, bool) -> f64,
{
    // level 0 uses all integer nodes; deeper levels add the odd multiples of h
    let mut h = 1.0;
    let mut sum = level_sum(h, false);
    let mut estimate = sum * h;
    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        sum += level_sum(h, true);
        let next = sum * h;
        let done = (next - estimate).abs() <= tol * next.abs().max(f64::MIN_POSITIVE);
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Sums `term(k*h)` for `k = 0, ±1, ±2, ...` (odd `k` only when `odd_only`),
/// stopping in each direction once terms become negligible.
fn sweep<T: Fn(f64) -> f64>(term: T, h: f64, odd_only: bool) -> f64 {
    let step = if odd_only { 2 } else { 1 };
    let start = if odd_only { 1 } else { 0 };
    let mut total = if odd_only { 0.0 } else { term(0.0) };
    for sign in [1.0, -1.0] {
        let mut k = if odd_only { start } else { 1 };
        let mut small = 0;
        while (k as f64) * h <= 7.0 {
            let v = term(sign * k as f64 * h);
            total += v;
            if v.abs() <= 1e-18 * total.abs() || v == 0.0 {
                small += 1;
                if small >= 3 {
                    break;
                }
            } else {
                small = 0;
            }
            k += step;
        }
    }
    total
}

/// Tanh-sinh rule on a finite interval; tolerates integrable endpoint
/// singularities.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let term = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        // distance to the nearer endpoint, computed without cancellation
        let dist = (b - a) * e / (1.0 + e);
        if dist == 0.0 {
            return 0.0;
        }
        let x = if t >= 0.0 { b - dist } else { a + dist };
        if x <= a || x >= b {
            return 0.0;
        }
        let c = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (c * c);
        if !w.is_finite() || w == 0.0 {
            return 0.0;
        }
        w * f(x)
    };
    refine(|h, odd| sweep(term, h, odd), tol)
}

/// Exp-sinh rule on `[a, ∞)`.
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    let term = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let e = u.exp();
        if e == 0.0 || !e.is_finite() {
            return 0.0;
        }
        let w = FRAC_PI_2 * t.cosh() * e;
        let v = w * f(a + e);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    refine(|h, odd| sweep(term, h, odd), tol)
}

/// Sinh-sinh rule on the whole line.
pub fn sinh_sinh<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
    let term = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let x = u.sinh();
        if !x.is_finite() {
            return 0.0;
        }
        let w = FRAC_PI_2 * t.cosh() * u.cosh();
        let v = w * f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    refine(|h, odd| sweep(term, h, odd), tol)
}

/// Integral over `[lower, upper]`, either end possibly infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lower: f64, upper: f64, tol: f64) -> f64 {
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => tanh_sinh(f, lower, upper, tol),
        (true, false) => exp_sinh(f, lower, tol),
        (false, true) => exp_sinh(|x| f(-x), -upper, tol),
        (false, false) => sinh_sinh(f, tol),
    }
}

/// Nodes and weights of an n-point Gauss rule for a probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Golub-Welsch: eigen-decomposition of the Jacobi matrix with diagonal
    /// `diag[0..n]` and off-diagonal `offdiag[0..n-1]` (the orthonormal
    /// recurrence coefficients `a_1 .. a_{n-1}`).
    pub fn from_jacobi(diag: &[f64], offdiag: &[f64]) -> Self {
        let n = diag.len();
        assert!(n >= 1 && offdiag.len() + 1 >= n, "Jacobi matrix dimensions");
        let j = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                diag[r]
            } else if r + 1 == c {
                offdiag[r]
            } else if c + 1 == r {
                offdiag[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        GaussRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}
