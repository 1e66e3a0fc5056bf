//! Marginal laws of the stationary process.
//!
//! Six families are supported: Gaussian, Gamma, Laplace, arcsine, semicircle
//! (Wigner) and q-Normal. Each carries an exact raw-moment generator, a
//! density, a distribution function and a support interval.
//!
//! Moments are produced in exact rational arithmetic ([`exact_raw_moments`])
//! and only rounded to `f64` at the boundary. The Hankel moment matrices built
//! from them are badly conditioned, so the orthonormal-basis constructions
//! downstream factor the exact matrices instead of the rounded ones.

mod density;
mod moments;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmprError};

pub use density::{qnormal_density, ProductTruncation};
pub(crate) use moments::{binomial, exact, min_scaled_eigenvalue, to_f64};
pub use moments::{
    exact_raw_moments, moment_matrix, moment_summary, moment_summary_to, raw_moments,
    MomentMatrix, MomentSummary, MAX_MOMENT_ORDER,
};

/// Family tag of a [`MarginalSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Gamma,
    Laplace,
    Arcsine,
    Semicircle,
    QNormal,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Gamma => "gamma",
            Family::Laplace => "laplace",
            Family::Arcsine => "arcsine",
            Family::Semicircle => "semicircle",
            Family::QNormal => "qnormal",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A closed or half-open interval, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
}

impl Support {
    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// A marginal law: family plus its parameters.
///
/// Serialized as `{"family": "...", "params": {...}}`; parameter names are
/// `shape` (Gamma), `radius` (semicircle) and `q` (q-Normal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub enum MarginalSpec {
    /// Standard normal N(0, 1).
    Gaussian,
    /// Gamma law with unit rate and shape `shape > 0`.
    Gamma { shape: f64 },
    /// Laplace law with density `exp(-|x|)/2`.
    Laplace,
    /// Arcsine law on [-1, 1].
    Arcsine,
    /// Wigner semicircle law on [-radius, radius].
    Semicircle { radius: f64 },
    /// q-Normal law, `q` in (-1, 1]; `q = 1` is the standard normal.
    QNormal { q: f64 },
}

impl MarginalSpec {
    pub fn gamma(shape: f64) -> Result<Self> {
        Self::Gamma { shape }.validated()
    }

    pub fn semicircle(radius: f64) -> Result<Self> {
        Self::Semicircle { radius }.validated()
    }

    pub fn qnormal(q: f64) -> Result<Self> {
        Self::QNormal { q }.validated()
    }

    /// Checks parameter ranges, returning the spec unchanged when valid.
    pub fn validated(self) -> Result<Self> {
        match self {
            MarginalSpec::Gamma { shape } if !(shape.is_finite() && shape > 0.0) => Err(
                SmprError::InvalidParameter(format!("gamma shape must be > 0, got {shape}")),
            ),
            MarginalSpec::Semicircle { radius } if !(radius.is_finite() && radius > 0.0) => Err(
                SmprError::InvalidParameter(format!("semicircle radius must be > 0, got {radius}")),
            ),
            MarginalSpec::QNormal { q } if !(q > -1.0 && q <= 1.0) => Err(
                SmprError::InvalidParameter(format!("q-Normal q must lie in (-1, 1], got {q}")),
            ),
            spec => Ok(spec),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            MarginalSpec::Gaussian => Family::Gaussian,
            MarginalSpec::Gamma { .. } => Family::Gamma,
            MarginalSpec::Laplace => Family::Laplace,
            MarginalSpec::Arcsine => Family::Arcsine,
            MarginalSpec::Semicircle { .. } => Family::Semicircle,
            MarginalSpec::QNormal { .. } => Family::QNormal,
        }
    }

    pub fn support(&self) -> Support {
        let inf = f64::INFINITY;
        match *self {
            MarginalSpec::Gaussian | MarginalSpec::Laplace => Support { lower: -inf, upper: inf },
            MarginalSpec::Gamma { .. } => Support { lower: 0.0, upper: inf },
            MarginalSpec::Arcsine => Support { lower: -1.0, upper: 1.0 },
            MarginalSpec::Semicircle { radius } => Support { lower: -radius, upper: radius },
            MarginalSpec::QNormal { q } if q >= 1.0 => Support { lower: -inf, upper: inf },
            MarginalSpec::QNormal { q } => {
                let r = 2.0 / (1.0 - q).sqrt();
                Support { lower: -r, upper: r }
            }
        }
    }

    /// Probability density at `x`; zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        density::density(self, x)
    }

    /// Distribution function `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        density::cdf(self, x)
    }

    /// Quantile function, the inverse of [`MarginalSpec::cdf`] for `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        density::quantile(self, p)
    }

    /// Interval used when tabulating distribution functions for sampling.
    ///
    /// Bounded supports are returned as is. The Gaussian is cut at ±10, the
    /// Gamma and Laplace laws at their `1 - 1e-12` quantiles.
    pub fn sampling_range(&self) -> Support {
        match *self {
            MarginalSpec::Gaussian => Support { lower: -10.0, upper: 10.0 },
            MarginalSpec::QNormal { q } if q >= 1.0 => Support { lower: -10.0, upper: 10.0 },
            MarginalSpec::Gamma { .. } => Support { lower: 0.0, upper: self.quantile(1.0 - 1e-12) },
            MarginalSpec::Laplace => {
                let r = -(2e-12f64).ln();
                Support { lower: -r, upper: r }
            }
            _ => self.support(),
        }
    }

    /// Interval for evaluation grids: a central region holding nearly all
    /// the mass, kept strictly inside bounded supports.
    pub fn evaluation_range(&self) -> Support {
        match *self {
            MarginalSpec::Gaussian => Support { lower: -3.0, upper: 3.0 },
            MarginalSpec::QNormal { q } if q >= 1.0 => Support { lower: -3.0, upper: 3.0 },
            MarginalSpec::Laplace => Support { lower: -5.0, upper: 5.0 },
            MarginalSpec::Gamma { .. } => Support {
                lower: self.quantile(1e-3),
                upper: self.quantile(1.0 - 1e-3),
            },
            _ => {
                let s = self.support();
                Support { lower: 0.95 * s.lower, upper: 0.95 * s.upper }
            }
        }
    }
}

impl fmt::Display for MarginalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarginalSpec::Gamma { shape } => write!(f, "gamma(shape={shape})"),
            MarginalSpec::Semicircle { radius } => write!(f, "semicircle(radius={radius})"),
            MarginalSpec::QNormal { q } => write!(f, "qnormal(q={q})"),
            other => f.write_str(other.family().name()),
        }
    }
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsRepr {
    #[serde(default, alias = "beta", skip_serializing_if = "Option::is_none")]
    shape: Option<f64>,
    #[serde(default, alias = "r", skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecRepr {
    family: String,
    #[serde(default)]
    params: ParamsRepr,
}

impl TryFrom<SpecRepr> for MarginalSpec {
    type Error = SmprError;

    fn try_from(repr: SpecRepr) -> Result<Self> {
        let p = repr.params;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                SmprError::InvalidParameter(format!("family {} requires params.{name}", repr.family))
            })
        };
        let spec = match repr.family.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => MarginalSpec::Gaussian,
            "gamma" => MarginalSpec::Gamma { shape: need(p.shape, "shape")? },
            "laplace" => MarginalSpec::Laplace,
            "arcsine" => MarginalSpec::Arcsine,
            "semicircle" | "wigner" => MarginalSpec::Semicircle { radius: p.radius.unwrap_or(1.0) },
            "qnormal" | "q-normal" => MarginalSpec::QNormal { q: need(p.q, "q")? },
            other => {
                return Err(SmprError::InvalidParameter(format!(
                    "unknown family '{other}' (expected gaussian, gamma, laplace, arcsine, semicircle or qnormal)"
                )))
            }
        };
        spec.validated()
    }
}

impl From<MarginalSpec> for SpecRepr {
    fn from(spec: MarginalSpec) -> Self {
        let mut params = ParamsRepr::default();
        match spec {
            MarginalSpec::Gamma { shape } => params.shape = Some(shape),
            MarginalSpec::Semicircle { radius } => params.radius = Some(radius),
            MarginalSpec::QNormal { q } => params.q = Some(q),
            _ => {}
        }
        SpecRepr { family: spec.family().name().to_string(), params }
    }
}
