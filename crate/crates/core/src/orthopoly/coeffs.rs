//! The coefficient matrix `c[j][n] = E X^j h_n(X)`, i.e. the expansion
//! `x^j = Σ_n c[j][n] h_n(x)`, which is also the lower-triangular Cholesky
//! factor of the Hankel moment matrix.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::OrthoBasis;
use crate::error::{Result, SmprError};
use crate::marginals::{exact_raw_moments, to_f64, MarginalSpec};

/// Degree cap for coefficient matrices built from moments.
pub const MAX_MOMENT_DEGREE: usize = 24;

/// Lower-triangular `c[j][n]`, `0 <= n <= j <= order`.
#[derive(Debug, Clone, Serialize)]
pub struct CoeffMatrix {
    rows: Vec<Vec<f64>>,
    /// Exact factor `c[j][n] c[i][n] = L[j][n] L[i][n] D[n]` when built from moments.
    #[serde(skip)]
    exact: Option<Arc<ExactFactor>>,
}

/// Exact `L D L^T` factor of a Hankel moment matrix.
#[derive(Debug)]
pub struct ExactFactor {
    pub l: Vec<Vec<BigRational>>,
    pub d: Vec<BigRational>,
}

impl ExactFactor {
    /// `c[j][n] c[i][n]` in exact arithmetic.
    pub fn product(&self, j: usize, i: usize, n: usize) -> BigRational {
        if n > j || n > i {
            return BigRational::zero();
        }
        &self.l[j][n] * &self.l[i][n] * &self.d[n]
    }
}

impl PartialEq for CoeffMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
    }
}

impl CoeffMatrix {
    /// Builds from lower-triangular rows (row `j` has `j + 1` entries).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        for (j, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), j + 1, "row {j} must have {} entries", j + 1);
        }
        CoeffMatrix { rows, exact: None }
    }

    pub fn order(&self) -> usize {
        self.rows.len() - 1
    }

    /// `c[j][n]`, zero above the diagonal.
    pub fn get(&self, j: usize, n: usize) -> f64 {
        if n > j {
            0.0
        } else {
            self.rows[j][n]
        }
    }

    /// The exact factor, present for matrices built by [`basis_from_moments`].
    pub fn exact(&self) -> Option<&ExactFactor> {
        self.exact.as_deref()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `Σ_n c[j][n] c[k][n]`, which equals the raw moment `m_{j+k}`.
    pub fn moment(&self, j: usize, k: usize) -> f64 {
        (0..=j.min(k)).map(|n| self.get(j, n) * self.get(k, n)).sum()
    }

    /// Leading `order + 1` rows.
    pub fn truncated(&self, order: usize) -> Self {
        CoeffMatrix { rows: self.rows[..=order.min(self.order())].to_vec(), exact: self.exact.clone() }
    }

    /// Coefficients generated by the basis recurrence:
    /// `c[j+1][m] = a_m c[j][m-1] + b_m c[j][m] + a_{m+1} c[j][m+1]`.
    pub fn from_recurrence(basis: &OrthoBasis, order: usize) -> Result<Self> {
        if order > basis.degree() {
            return Err(SmprError::OutOfRange { index: order, max: basis.degree() });
        }
        let mut rows = vec![vec![1.0]];
        for j in 0..order {
            let prev = &rows[j];
            let row = (0..=j + 1)
                .map(|m| {
                    let at = |n: usize| if n <= j { prev[n] } else { 0.0 };
                    let mut v = 0.0;
                    if m > 0 {
                        v += basis.offdiag(m) * at(m - 1);
                    }
                    if m <= j {
                        v += basis.diag(m) * at(m);
                    }
                    if m < j {
                        v += basis.offdiag(m + 1) * at(m + 1);
                    }
                    v
                })
                .collect();
            rows.push(row);
        }
        Ok(CoeffMatrix { rows, exact: None })
    }
}

/// Coefficient matrix of order `degree` from the exact `L D L^T`
/// factorization of the rational moment matrix: `c[j][n] = L[j][n] sqrt(D[n])`.
///
/// Pivots are exact, so the only rounding happens in the final conversion.
/// A non-positive pivot means the moment sequence is degenerate at that
/// order and is reported as a breakdown.
pub fn basis_from_moments(spec: &MarginalSpec, degree: usize) -> Result<CoeffMatrix> {
    if degree > MAX_MOMENT_DEGREE {
        return Err(SmprError::OrderTooHigh { requested: degree, max: MAX_MOMENT_DEGREE });
    }
    let m = exact_raw_moments(spec, 2 * degree)?;
    let (l, d) = ldl_hankel(&m, degree)?;
    let sqrt_d: Vec<f64> = d.iter().map(|p| to_f64(p).sqrt()).collect();
    let rows = (0..=degree)
        .map(|j| (0..=j).map(|n| to_f64(&l[j][n]) * sqrt_d[n]).collect())
        .collect();
    Ok(CoeffMatrix { rows, exact: Some(Arc::new(ExactFactor { l, d })) })
}

type Ldl = (Vec<Vec<BigRational>>, Vec<BigRational>);

fn ldl_hankel(m: &[BigRational], k: usize) -> Result<Ldl> {
    let n = k + 1;
    let mut l = vec![vec![BigRational::zero(); n]; n];
    let mut d: Vec<BigRational> = Vec::with_capacity(n);
    for j in 0..n {
        // pivot
        let mut dj = m[2 * j].clone();
        for p in 0..j {
            dj -= &l[j][p] * &l[j][p] * &d[p];
        }
        if !dj.is_positive() {
            return Err(SmprError::CholeskyBreakdown { order: j, pivot: to_f64(&dj) });
        }
        l[j][j] = BigRational::one();
        for i in j + 1..n {
            let mut v = m[i + j].clone();
            for p in 0..j {
                v -= &l[i][p] * &l[j][p] * &d[p];
            }
            l[i][j] = v / &dj;
        }
        d.push(dj);
    }
    Ok((l, d))
}

/// Coefficient matrix from closed-form expansions of `x^j`:
///
/// * Gaussian: `c[j][n] = j! / (2^{(j-n)/2} ((j-n)/2)! sqrt(n!))` for `j - n` even;
/// * arcsine: `x^j = 2^{1-j} Σ' binom(j, (j-n)/2) T_n(x)` (the `n = 0` term
///   halved), with `h_n = sqrt(2) T_n`;
/// * semicircle of radius `r`: `c[j][n] = r^j (n+1)/(j+1) binom(j+1, (j-n)/2) / 2^j`.
pub fn coeffs_from_expansion(spec: &MarginalSpec, degree: usize) -> Result<CoeffMatrix> {
    let spec = spec.validated()?;
    if degree > MAX_MOMENT_DEGREE {
        return Err(SmprError::OrderTooHigh { requested: degree, max: MAX_MOMENT_DEGREE });
    }
    let entry: Box<dyn Fn(usize, usize) -> f64> = match spec {
        MarginalSpec::Gaussian => Box::new(|j, n| {
            let h = (j - n) / 2;
            // j! / (2^h h!) is an integer
            let num = factorial_big(j) / (BigInt::from(2).pow(h as u32) * factorial_big(h));
            big_to_f64(&num) / big_to_f64(&factorial_big(n)).sqrt()
        }),
        MarginalSpec::Arcsine => Box::new(|j, n| {
            let b = big_to_f64(&binomial_big(j, (j - n) / 2));
            if n == 0 {
                b / 2f64.powi(j as i32)
            } else {
                b * 2f64.powi(1 - j as i32) / std::f64::consts::SQRT_2
            }
        }),
        MarginalSpec::Semicircle { radius } => Box::new(move |j, n| {
            let ballot = binomial_big(j + 1, (j - n) / 2) * BigInt::from(n + 1) / BigInt::from(j + 1);
            big_to_f64(&ballot) * (radius / 2.0).powi(j as i32)
        }),
        other => {
            return Err(SmprError::Unsupported {
                family: other.family().name(),
                what: "closed-form monomial expansion table".into(),
            })
        }
    };
    let rows = (0..=degree)
        .map(|j| (0..=j).map(|n| if (j - n) % 2 == 0 { entry(j, n) } else { 0.0 }).collect())
        .collect();
    Ok(CoeffMatrix { rows, exact: None })
}

fn factorial_big(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn binomial_big(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn big_to_f64(x: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::INFINITY)
}
