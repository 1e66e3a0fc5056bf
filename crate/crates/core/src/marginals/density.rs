use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, Gamma, Normal};
use statrs::function::gamma::ln_gamma;

use super::MarginalSpec;
use crate::quadrature;

/// Where the q-Normal infinite products were cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductTruncation {
    /// Number of factors `k >= 1` multiplied in.
    pub factors: usize,
    /// Bound on the relative error from the omitted factors.
    pub bound: f64,
}

const PRODUCT_CUTOFF: f64 = 1e-16;

/// q-Normal density together with the truncation of its infinite products.
///
/// The `k = 0` factor `4 - (1-q)x^2` is folded into the prefactor; factors
/// `k >= 1` are multiplied until one differs from 1 by less than `1e-16`.
pub fn qnormal_density(x: f64, q: f64) -> (f64, ProductTruncation) {
    if q >= 1.0 {
        return (gaussian_pdf(x), ProductTruncation { factors: 0, bound: 0.0 });
    }
    let s = 1.0 - q;
    let inner = 4.0 - s * x * x;
    if inner <= 0.0 {
        return (0.0, ProductTruncation { factors: 0, bound: 0.0 });
    }
    let mut value = s.sqrt() * inner.sqrt() / (2.0 * PI);
    let mut qk = q;
    let mut k = 0;
    let mut last_dev = 0.0;
    while qk != 0.0 {
        k += 1;
        let f = ((1.0 + qk).powi(2) - s * x * x * qk) * (1.0 - qk);
        value *= f;
        last_dev = (f - 1.0).abs();
        if last_dev < PRODUCT_CUTOFF {
            break;
        }
        qk *= q;
    }
    let aq = q.abs();
    let bound = if aq > 0.0 { last_dev * aq / (1.0 - aq) } else { 0.0 };
    (value, ProductTruncation { factors: k, bound })
}

fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub(super) fn density(spec: &MarginalSpec, x: f64) -> f64 {
    match *spec {
        MarginalSpec::Gaussian => gaussian_pdf(x),
        MarginalSpec::Gamma { shape } => {
            if x <= 0.0 {
                0.0
            } else {
                ((shape - 1.0) * x.ln() - x - ln_gamma(shape)).exp()
            }
        }
        MarginalSpec::Laplace => 0.5 * (-x.abs()).exp(),
        MarginalSpec::Arcsine => {
            if x.abs() >= 1.0 {
                0.0
            } else {
                1.0 / (PI * (1.0 - x * x).sqrt())
            }
        }
        MarginalSpec::Semicircle { radius } => {
            let r2 = radius * radius;
            if x.abs() >= radius {
                0.0
            } else {
                2.0 / (PI * r2) * (r2 - x * x).sqrt()
            }
        }
        MarginalSpec::QNormal { q } => qnormal_density(x, q).0,
    }
}

pub(super) fn cdf(spec: &MarginalSpec, x: f64) -> f64 {
    let supp = spec.support();
    if x <= supp.lower {
        return 0.0;
    }
    if x >= supp.upper {
        return 1.0;
    }
    match *spec {
        MarginalSpec::Gaussian => Normal::standard().cdf(x),
        MarginalSpec::QNormal { q } if q >= 1.0 => Normal::standard().cdf(x),
        MarginalSpec::Gamma { shape } => Gamma::new(shape, 1.0).expect("valid shape").cdf(x),
        MarginalSpec::Laplace => {
            if x < 0.0 {
                0.5 * x.exp()
            } else {
                1.0 - 0.5 * (-x).exp()
            }
        }
        MarginalSpec::Arcsine => 0.5 + x.asin() / PI,
        MarginalSpec::Semicircle { radius } => {
            let u = x / radius;
            0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / PI
        }
        MarginalSpec::QNormal { q } => {
            // symmetric law: integrate the shorter side
            let d = |t: f64| qnormal_density(t, q).0;
            let tail = quadrature::tanh_sinh(d, supp.lower, -x.abs(), 1e-14);
            if x < 0.0 {
                tail
            } else {
                1.0 - tail
            }
        }
    }
}

pub(super) fn quantile(spec: &MarginalSpec, p: f64) -> f64 {
    let supp = spec.support();
    if p <= 0.0 {
        return supp.lower;
    }
    if p >= 1.0 {
        return supp.upper;
    }
    match *spec {
        MarginalSpec::Gaussian => Normal::standard().inverse_cdf(p),
        MarginalSpec::QNormal { q } if q >= 1.0 => Normal::standard().inverse_cdf(p),
        MarginalSpec::Gamma { shape } => Gamma::new(shape, 1.0).expect("valid shape").inverse_cdf(p),
        MarginalSpec::Laplace => {
            if p < 0.5 {
                (2.0 * p).ln()
            } else {
                -(2.0 * (1.0 - p)).ln()
            }
        }
        MarginalSpec::Arcsine => (PI * (p - 0.5)).sin(),
        _ => bisect_quantile(spec, p, supp.lower, supp.upper),
    }
}

fn bisect_quantile(spec: &MarginalSpec, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spec.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_examples() {
        assert!((MarginalSpec::Semicircle { radius: 1.0 }.density(0.0) - 2.0 / PI).abs() < 1e-15);
        assert!((MarginalSpec::Arcsine.density(0.0) - 1.0 / PI).abs() < 1e-15);
        assert_eq!(MarginalSpec::Laplace.density(0.0), 0.5);
        assert_eq!(MarginalSpec::Arcsine.density(1.5), 0.0);
        assert_eq!(MarginalSpec::Gamma { shape: 2.0 }.density(-1.0), 0.0);
    }

    #[test]
    fn qnormal_density_special_cases() {
        // q = 0 is the semicircle of radius 2
        for x in [-1.9, -0.3, 0.0, 1.2] {
            let (v, t) = qnormal_density(x, 0.0);
            assert!((v - (4.0 - x * x).sqrt() / (2.0 * PI)).abs() < 1e-15);
            assert_eq!(t.bound, 0.0);
        }
        let (_, t) = qnormal_density(0.3, 0.9);
        assert!(t.factors > 100 && t.bound < 1e-14);
        assert_eq!(qnormal_density(3.0, 0.0).0, 0.0);
    }

    #[test]
    fn cdf_quantile_inverse() {
        let specs = [
            MarginalSpec::Gaussian,
            MarginalSpec::Gamma { shape: 0.5 },
            MarginalSpec::Laplace,
            MarginalSpec::Arcsine,
            MarginalSpec::Semicircle { radius: 2.0 },
            MarginalSpec::QNormal { q: 0.5 },
        ];
        for spec in specs {
            for p in [0.01, 0.3, 0.5, 0.77, 0.99] {
                let x = spec.quantile(p);
                assert!((spec.cdf(x) - p).abs() < 1e-9, "{spec} p={p}");
            }
        }
    }
}
