use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::MarginalSpec;
use crate::error::{Result, SmprError};

/// Highest raw-moment order produced. Twice the coefficient-matrix degree
/// cap, since a degree-k basis needs moments through order 2k.
pub const MAX_MOMENT_ORDER: usize = 48;

/// Exact `f64 -> rational` conversion; every finite double is a dyadic rational.
pub(crate) fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite parameter")
}

pub(crate) fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn int(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Raw moments `E X^0 ..= E X^max_order` in exact rational arithmetic.
///
/// Parameters are converted to rationals exactly, so for every family the
/// result is the exact moment sequence of the law with the given `f64`
/// parameters.
pub fn exact_raw_moments(spec: &MarginalSpec, max_order: usize) -> Result<Vec<BigRational>> {
    if max_order > MAX_MOMENT_ORDER {
        return Err(SmprError::OrderTooHigh { requested: max_order, max: MAX_MOMENT_ORDER });
    }
    let spec = spec.validated()?;
    let mut m = vec![BigRational::zero(); max_order + 1];
    m[0] = BigRational::one();
    match spec {
        MarginalSpec::Gaussian => {
            // (2n-1)!!
            for j in (2..=max_order).step_by(2) {
                m[j] = &m[j - 2] * int(j - 1);
            }
        }
        MarginalSpec::Gamma { shape } => {
            // raising factorial (β)^{(j)}
            let beta = exact(shape);
            for j in 1..=max_order {
                m[j] = &m[j - 1] * (&beta + int(j - 1));
            }
        }
        MarginalSpec::Laplace => {
            for j in (2..=max_order).step_by(2) {
                m[j] = &m[j - 2] * int(j) * int(j - 1);
            }
        }
        MarginalSpec::Arcsine => {
            // binom(2n, n) / 4^n
            for j in (2..=max_order).step_by(2) {
                m[j] = &m[j - 2] * int(j - 1) / int(j);
            }
        }
        MarginalSpec::Semicircle { radius } => {
            // r^{2n} C_n / 4^n
            let r2 = exact(radius) * exact(radius);
            for j in (2..=max_order).step_by(2) {
                let n = j / 2;
                m[j] = &m[j - 2] * &r2 * int(2 * n - 1) / (int(2) * int(n + 1));
            }
        }
        MarginalSpec::QNormal { q } => {
            qnormal_moments(&exact(q), &mut m);
        }
    }
    Ok(m)
}

/// Moments of the q-Normal law from its Jacobi parameters `a_n^2 = [n]_q`:
/// weighted Motzkin-path counts with no level steps.
fn qnormal_moments(q: &BigRational, m: &mut [BigRational]) {
    let max_order = m.len() - 1;
    let top = max_order / 2 + 1;
    // [n]_q for n = 0..=top
    let mut qint = vec![BigRational::zero(); top + 1];
    let mut qpow = BigRational::one();
    for n in 1..=top {
        qint[n] = &qint[n - 1] + &qpow;
        qpow = &qpow * q;
    }
    let mut paths = vec![BigRational::zero(); top + 1];
    paths[0] = BigRational::one();
    for j in 1..=max_order {
        let mut next = vec![BigRational::zero(); top + 1];
        for h in 0..=top {
            let mut v = BigRational::zero();
            if h > 0 {
                v += &paths[h - 1];
            }
            if h < top {
                v += &qint[h + 1] * &paths[h + 1];
            }
            next[h] = v;
        }
        paths = next;
        m[j] = paths[0].clone();
    }
}

/// Raw moments rounded to `f64`.
pub fn raw_moments(spec: &MarginalSpec, max_order: usize) -> Result<Vec<f64>> {
    Ok(exact_raw_moments(spec, max_order)?.iter().map(to_f64).collect())
}

/// Mean, central moments, Fisher skewness and excess kurtosis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSummary {
    pub mean: f64,
    /// `central[j] = E(X - mean)^j`; `central[0] = 1`, `central[1] = 0`.
    pub central: Vec<f64>,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl MomentSummary {
    pub fn m2(&self) -> f64 {
        self.central[2]
    }
    pub fn m3(&self) -> f64 {
        self.central[3]
    }
    pub fn m4(&self) -> f64 {
        self.central[4]
    }

    /// Rebuilds raw moments from the mean and central moments.
    pub fn to_raw(&self) -> Vec<f64> {
        (0..self.central.len())
            .map(|j| {
                (0..=j)
                    .map(|i| binomial(j, i) * self.mean.powi((j - i) as i32) * self.central[i])
                    .sum()
            })
            .collect()
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn binomial_exact(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Exact central moments `E(X - ν)^j` for `j <= order`, plus the mean.
pub(crate) fn exact_central_moments(spec: &MarginalSpec, order: usize) -> Result<(BigRational, Vec<BigRational>)> {
    let raw = exact_raw_moments(spec, order.max(1))?;
    let nu = raw[1].clone();
    let neg = -nu.clone();
    let central = (0..=order)
        .map(|j| {
            let mut acc = BigRational::zero();
            let mut pw = BigRational::one();
            // Σ_i binom(j, i) raw_i (-ν)^{j-i}, accumulated from i = j downwards
            for i in (0..=j).rev() {
                acc += BigRational::from_integer(binomial_exact(j, i)) * &raw[i] * &pw;
                pw = &pw * &neg;
            }
            acc
        })
        .collect();
    Ok((nu, central))
}

/// Moment summary with central moments through order 4.
pub fn moment_summary(spec: &MarginalSpec) -> Result<MomentSummary> {
    moment_summary_to(spec, 4)
}

/// Moment summary with central moments through `order` (at least 4).
pub fn moment_summary_to(spec: &MarginalSpec, order: usize) -> Result<MomentSummary> {
    let order = order.max(4);
    let (nu, central) = exact_central_moments(spec, order)?;
    let m2 = &central[2];
    if !m2.is_positive() {
        return Err(SmprError::Degenerate(format!("{spec} has zero variance")));
    }
    let m2f = to_f64(m2);
    let skewness = to_f64(&central[3]) / m2f.powf(1.5);
    let excess_kurtosis = to_f64(&(&central[4] / (m2 * m2))) - 3.0;
    Ok(MomentSummary {
        mean: to_f64(&nu),
        central: central.iter().map(to_f64).collect(),
        skewness,
        excess_kurtosis,
    })
}

/// Hankel matrix of raw moments, `entries[i][j] = m_{i+j}` for `0 <= i, j <= order`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentMatrix {
    pub order: usize,
    pub entries: Vec<Vec<f64>>,
}

impl MomentMatrix {
    pub fn from_moments(moments: &[f64], order: usize) -> Self {
        assert!(moments.len() > 2 * order, "need moments through order {}", 2 * order);
        let entries = (0..=order)
            .map(|i| (0..=order).map(|j| moments[i + j]).collect())
            .collect();
        MomentMatrix { order, entries }
    }

    /// Smallest eigenvalue of the matrix after symmetric diagonal scaling
    /// `D^{-1/2} M D^{-1/2}`, which removes the growth of moments with order.
    pub fn min_scaled_eigenvalue(&self) -> f64 {
        min_scaled_eigenvalue(&self.entries)
    }
}

/// Smallest eigenvalue of a symmetric matrix scaled to unit diagonal.
/// Rows with a non-positive diagonal are left unscaled.
pub(crate) fn min_scaled_eigenvalue(entries: &[Vec<f64>]) -> f64 {
    let n = entries.len();
    if n == 0 {
        return 0.0;
    }
    let scale: Vec<f64> = (0..n)
        .map(|i| if entries[i][i] > 0.0 { 1.0 / entries[i][i].sqrt() } else { 1.0 })
        .collect();
    let m = DMatrix::from_fn(n, n, |i, j| entries[i][j] * scale[i] * scale[j]);
    m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Hankel moment matrix of order `k` (moments through `2k`).
pub fn moment_matrix(spec: &MarginalSpec, k: usize) -> Result<MomentMatrix> {
    let m = raw_moments(spec, 2 * k)?;
    Ok(MomentMatrix::from_moments(&m, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn closed_form_examples() {
        close(&raw_moments(&MarginalSpec::Gamma { shape: 2.0 }, 3).unwrap(), &[1.0, 2.0, 6.0, 24.0], 0.0);
        close(&raw_moments(&MarginalSpec::Gaussian, 4).unwrap(), &[1.0, 0.0, 1.0, 0.0, 3.0], 0.0);
        close(
            &raw_moments(&MarginalSpec::Semicircle { radius: 1.0 }, 4).unwrap(),
            &[1.0, 0.0, 0.25, 0.0, 0.125],
            0.0,
        );
        close(&raw_moments(&MarginalSpec::Arcsine, 4).unwrap(), &[1.0, 0.0, 0.5, 0.0, 0.375], 0.0);
        close(&raw_moments(&MarginalSpec::Laplace, 6).unwrap(), &[1.0, 0.0, 2.0, 0.0, 24.0, 0.0, 720.0], 0.0);
    }

    #[test]
    fn qnormal_limits() {
        // q = 1 is the Gaussian, q = 0 the semicircle of radius 2
        let g = raw_moments(&MarginalSpec::Gaussian, 12).unwrap();
        close(&raw_moments(&MarginalSpec::QNormal { q: 1.0 }, 12).unwrap(), &g, 0.0);
        let w = raw_moments(&MarginalSpec::Semicircle { radius: 2.0 }, 12).unwrap();
        close(&raw_moments(&MarginalSpec::QNormal { q: 0.0 }, 12).unwrap(), &w, 0.0);
        let m = raw_moments(&MarginalSpec::QNormal { q: 0.5 }, 6).unwrap();
        // m4 = 2 + q, m6 = 5 + 6q + 3q^2 + q^3
        close(&m, &[1.0, 0.0, 1.0, 0.0, 2.5, 0.0, 5.0 + 3.0 + 0.75 + 0.125], 1e-15);
        let near = raw_moments(&MarginalSpec::QNormal { q: 1.0 - 1e-9 }, 4).unwrap();
        assert!((near[4] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn order_cap() {
        assert!(matches!(
            raw_moments(&MarginalSpec::Gaussian, MAX_MOMENT_ORDER + 1),
            Err(SmprError::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn summaries() {
        let s = moment_summary(&MarginalSpec::Laplace).unwrap();
        assert_eq!((s.mean, s.m2(), s.m3(), s.m4()), (0.0, 2.0, 0.0, 24.0));
        assert_eq!((s.skewness, s.excess_kurtosis), (0.0, 3.0));
        for beta in [0.5, 1.0, 2.0, 10.0] {
            let s = moment_summary(&MarginalSpec::Gamma { shape: beta }).unwrap();
            assert!((s.skewness - 2.0 / beta.sqrt()).abs() < 1e-14);
            assert!((s.excess_kurtosis - 6.0 / beta).abs() < 1e-13);
            assert!((s.mean - beta).abs() < 1e-15);
        }
        for q in [-0.5, 0.0, 0.5, 1.0] {
            let s = moment_summary(&MarginalSpec::QNormal { q }).unwrap();
            assert_eq!(s.skewness, 0.0);
            assert!((s.excess_kurtosis - (q - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn moment_matrices() {
        let m = moment_matrix(&MarginalSpec::Gaussian, 2).unwrap();
        assert_eq!(m.entries, vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 3.0]]);
        assert_eq!(moment_matrix(&MarginalSpec::Laplace, 0).unwrap().entries, vec![vec![1.0]]);
        let a = moment_matrix(&MarginalSpec::Arcsine, 2).unwrap();
        assert_eq!(a.entries, vec![vec![1.0, 0.0, 0.5], vec![0.0, 0.5, 0.0], vec![0.5, 0.0, 0.375]]);
    }

    #[test]
    fn hankel_psd_through_order_8() {
        let specs = [
            MarginalSpec::Gaussian,
            MarginalSpec::Gamma { shape: 2.0 },
            MarginalSpec::Laplace,
            MarginalSpec::Arcsine,
            MarginalSpec::Semicircle { radius: 1.0 },
            MarginalSpec::QNormal { q: 0.5 },
        ];
        for spec in specs {
            for k in 0..=8 {
                let ev = moment_matrix(&spec, k).unwrap().min_scaled_eigenvalue();
                assert!(ev >= -1e-10, "{spec} k={k}: {ev}");
            }
        }
    }
}
