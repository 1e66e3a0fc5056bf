//! Orthonormal polynomials of a marginal law.
//!
//! A basis is stored as its Jacobi parameters: the orthonormal recurrence
//! `x h_n = a_{n+1} h_{n+1} + b_n h_n + a_n h_{n-1}` with `h_{-1} = 0`,
//! `h_0 = 1`. Named families (Hermite, Laguerre, Chebyshev T and U,
//! q-Hermite) have closed-form parameters; the Laplace law has none and its
//! parameters are read off the Cholesky factor of the moment matrix.
//!
//! Leading coefficients are positive throughout, which matches the positive
//! diagonal of the Cholesky factor.

mod coeffs;

use serde::Serialize;

use crate::error::{Result, SmprError};
use crate::marginals::MarginalSpec;
use crate::quadrature::GaussRule;

pub use coeffs::{basis_from_moments, coeffs_from_expansion, CoeffMatrix, ExactFactor, MAX_MOMENT_DEGREE};

/// Highest degree built from a named recurrence. Lancaster series at small
/// times need many terms.
pub const MAX_RECURRENCE_DEGREE: usize = 512;

/// Classical polynomial family behind a basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PolyFamily {
    /// Probabilists' Hermite `He_n`, orthonormal after division by `sqrt(n!)`.
    Hermite,
    /// Generalized Laguerre with weight `x^{shape-1} e^{-x}`.
    Laguerre { shape: f64 },
    /// Chebyshev first kind; `h_n = sqrt(2) T_n` for `n >= 1`.
    ChebyshevT,
    /// Chebyshev second kind on `[-radius, radius]`; `h_n(x) = U_n(x / radius)`.
    ChebyshevU { radius: f64 },
    /// Continuous q-Hermite, `H_{n+1} = x H_n - [n]_q H_{n-1}`.
    QHermite { q: f64 },
}

/// How a basis was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BasisSource {
    Recurrence(PolyFamily),
    Moments,
}

/// One step of the recurrence in the form `h_{n+1} = (A x + B) h_n - C h_{n-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceStep {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Orthonormal polynomials `h_0 ..= h_degree` of a marginal law.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    spec: MarginalSpec,
    degree: usize,
    source: BasisSource,
    /// `b_0 .. b_{degree-1}`
    diag: Vec<f64>,
    /// `a_1 .. a_degree`
    offdiag: Vec<f64>,
}

/// Named recurrence for a family, if it has one.
pub fn poly_family(spec: &MarginalSpec) -> Option<PolyFamily> {
    match *spec {
        MarginalSpec::Gaussian => Some(PolyFamily::Hermite),
        MarginalSpec::Gamma { shape } => Some(PolyFamily::Laguerre { shape }),
        MarginalSpec::Laplace => None,
        MarginalSpec::Arcsine => Some(PolyFamily::ChebyshevT),
        MarginalSpec::Semicircle { radius } => Some(PolyFamily::ChebyshevU { radius }),
        MarginalSpec::QNormal { q } if q >= 1.0 => Some(PolyFamily::Hermite),
        MarginalSpec::QNormal { q } => Some(PolyFamily::QHermite { q }),
    }
}

impl PolyFamily {
    /// Jacobi parameters `(b_n, a_{n+1})` for `n = 0 .. degree`.
    fn jacobi(self, degree: usize) -> (Vec<f64>, Vec<f64>) {
        let mut diag = Vec::with_capacity(degree);
        let mut off = Vec::with_capacity(degree);
        for n in 0..degree {
            let nf = n as f64;
            let (b, a_next) = match self {
                PolyFamily::Hermite => (0.0, (nf + 1.0).sqrt()),
                PolyFamily::Laguerre { shape } => {
                    (2.0 * nf + shape, ((nf + 1.0) * (nf + shape)).sqrt())
                }
                PolyFamily::ChebyshevT => (0.0, if n == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 0.5 }),
                PolyFamily::ChebyshevU { radius } => (0.0, 0.5 * radius),
                PolyFamily::QHermite { q } => (0.0, q_integer(n + 1, q).sqrt()),
            };
            diag.push(b);
            off.push(a_next);
        }
        (diag, off)
    }

    /// Factor `k_n` with `|h_n| = k_n |P_n|`, where `P_n` is the classical
    /// polynomial in its usual normalization. For Laguerre the sign is
    /// `(-1)^n`, since `L_n` has leading coefficient `(-1)^n / n!`.
    pub fn normalization(self, n: usize) -> f64 {
        match self {
            PolyFamily::Hermite => 1.0 / factorial(n).sqrt(),
            PolyFamily::Laguerre { shape } => {
                use statrs::function::gamma::ln_gamma;
                (0.5 * (ln_factorial(n) + ln_gamma(shape) - ln_gamma(n as f64 + shape))).exp()
            }
            PolyFamily::ChebyshevT => {
                if n == 0 {
                    1.0
                } else {
                    std::f64::consts::SQRT_2
                }
            }
            PolyFamily::ChebyshevU { .. } => 1.0,
            PolyFamily::QHermite { q } => {
                1.0 / (1..=n).map(|k| q_integer(k, q)).product::<f64>().sqrt()
            }
        }
    }
}

/// `[n]_q = 1 + q + ... + q^{n-1}`.
pub fn q_integer(n: usize, q: f64) -> f64 {
    if q == 1.0 {
        n as f64
    } else {
        (0..n).map(|k| q.powi(k as i32)).sum()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Basis from the family's named three-term recurrence.
pub fn basis_from_recurrence(spec: &MarginalSpec, degree: usize) -> Result<OrthoBasis> {
    let spec = spec.validated()?;
    let family = poly_family(&spec).ok_or_else(|| SmprError::Unsupported {
        family: spec.family().name(),
        what: "named three-term recurrence; use the moment route".into(),
    })?;
    if degree > MAX_RECURRENCE_DEGREE {
        return Err(SmprError::OutOfRange { index: degree, max: MAX_RECURRENCE_DEGREE });
    }
    let (diag, offdiag) = family.jacobi(degree);
    Ok(OrthoBasis { spec, degree, source: BasisSource::Recurrence(family), diag, offdiag })
}

impl OrthoBasis {
    /// Named recurrence when the family has one, moment route otherwise.
    /// The moment route caps the degree at [`MAX_MOMENT_DEGREE`].
    pub fn new(spec: &MarginalSpec, degree: usize) -> Result<Self> {
        if poly_family(spec).is_some() {
            basis_from_recurrence(spec, degree)
        } else {
            Self::from_moments(spec, degree.min(MAX_MOMENT_DEGREE))
        }
    }

    /// Basis read off the exact Cholesky factor of the moment matrix.
    pub fn from_moments(spec: &MarginalSpec, degree: usize) -> Result<Self> {
        let c = basis_from_moments(spec, degree)?;
        Ok(Self::from_coeffs(*spec, &c))
    }

    /// Jacobi parameters from a coefficient matrix:
    /// `a_{n+1} = c_{n+1,n+1} / c_{n,n}` and
    /// `b_n = c_{n+1,n} / c_{n,n} - c_{n,n-1} / c_{n-1,n-1}`.
    pub fn from_coeffs(spec: MarginalSpec, c: &CoeffMatrix) -> Self {
        let degree = c.order();
        let mut diag = Vec::with_capacity(degree);
        let mut offdiag = Vec::with_capacity(degree);
        for n in 0..degree {
            let mut b = c.get(n + 1, n) / c.get(n, n);
            if n > 0 {
                b -= c.get(n, n - 1) / c.get(n - 1, n - 1);
            }
            diag.push(b);
            offdiag.push(c.get(n + 1, n + 1) / c.get(n, n));
        }
        OrthoBasis { spec, degree, source: BasisSource::Moments, diag, offdiag }
    }

    pub fn spec(&self) -> &MarginalSpec {
        &self.spec
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn source(&self) -> BasisSource {
        self.source
    }

    /// `b_n`, the diagonal Jacobi parameter.
    pub fn diag(&self, n: usize) -> f64 {
        self.diag[n]
    }

    /// `a_n` for `n >= 1` (`a_0 = 0`).
    pub fn offdiag(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.offdiag[n - 1]
        }
    }

    /// Coefficients of `h_{n+1} = (A x + B) h_n - C h_{n-1}`, for `n < degree`.
    pub fn recurrence(&self, n: usize) -> Result<RecurrenceStep> {
        if n >= self.degree {
            return Err(SmprError::OutOfRange { index: n, max: self.degree.saturating_sub(1) });
        }
        let a_next = self.offdiag[n];
        Ok(RecurrenceStep { a: 1.0 / a_next, b: -self.diag[n] / a_next, c: self.offdiag(n) / a_next })
    }

    /// `h_n(x)` by forward recurrence.
    pub fn eval(&self, n: usize, x: f64) -> Result<f64> {
        if n > self.degree {
            return Err(SmprError::OutOfRange { index: n, max: self.degree });
        }
        let mut prev = 0.0;
        let mut cur = 1.0;
        for k in 0..n {
            let next = ((x - self.diag[k]) * cur - self.offdiag(k) * prev) / self.offdiag[k];
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// Fills `out` with `h_0(x) ..= h_{out.len()-1}(x)`.
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        assert!(out.len() <= self.degree + 1, "requested beyond basis degree");
        let mut prev = 0.0;
        let mut cur = 1.0;
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = cur;
            if k < self.degree {
                let next = ((x - self.diag[k]) * cur - self.offdiag(k) * prev) / self.offdiag[k];
                prev = cur;
                cur = next;
            }
        }
    }

    /// Gauss rule with `nodes` points from the basis' own Jacobi parameters.
    pub fn gauss_rule(&self, nodes: usize) -> Result<GaussRule> {
        if nodes == 0 || nodes > self.degree {
            return Err(SmprError::OutOfRange { index: nodes, max: self.degree });
        }
        Ok(GaussRule::from_jacobi(&self.diag[..nodes], &self.offdiag[..nodes - 1]))
    }
}

/// Convenience wrapper over [`OrthoBasis::eval`].
pub fn eval_h(basis: &OrthoBasis, n: usize, x: f64) -> Result<f64> {
    basis.eval(n, x)
}
