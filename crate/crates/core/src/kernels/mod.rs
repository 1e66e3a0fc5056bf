//! Transition densities of the process.
//!
//! A kernel is evaluated either as the truncated Lancaster series
//! `Σ e^{-α_n t} h_n(x) h_n(y)` or, for four (marginal, rate) pairs, in
//! closed form:
//!
//! | marginal   | rates        | closed form                  |
//! |------------|--------------|------------------------------|
//! | Gaussian   | `n`          | Mehler                       |
//! | Gamma      | `n`          | Hardy-Hille (Bessel `I`)     |
//! | arcsine    | `n^2`        | sum of two theta functions   |
//! | semicircle | `n(n+2)/3`   | difference of theta functions|

mod checks;
mod special;

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::continuity::{AlphaSequence, RateFamily};
use crate::error::{Result, SmprError};
use crate::marginals::MarginalSpec;
use crate::orthopoly::{OrthoBasis, MAX_RECURRENCE_DEGREE};

pub use checks::{
    chapman_kolmogorov_check, grid_points, martingale_check, positivity_scan, row_integral, verify_kernel,
    CkResidual, DualityCheck, KernelVerification, MartingaleResidual, PositivityReport, VerifyOptions, CHECK_NODES,
};
pub use special::{
    bessel_i, jacobi_theta, ln_bessel_i, theta_difference, theta_log_nome, theta_triple_product, ThetaParams, BESSEL_MAX_ARG,
};

/// Default bound on the omitted Lancaster terms.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

/// Closed forms available for a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedForm {
    Mehler,
    HardyHille { shape: f64 },
    ArcsineTheta,
    SemicircleTheta { radius: f64 },
}

/// A truncated series value with its truncation data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Terms summed, `n = 0 .. terms`.
    pub terms: usize,
    /// Largest `e^{-α_n t} max(h_n(x)², h_n(y)²)` over the omitted scanned terms.
    pub bound: f64,
}

/// A process model `(μ, α)` with its basis and truncation policy.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    spec: MarginalSpec,
    basis: OrthoBasis,
    alpha: AlphaSequence,
    tolerance: f64,
    use_closed_form: bool,
}

impl TransitionKernel {
    /// Basis of degree 512 from the named recurrence, or of degree 24 from
    /// moments for the Laplace law.
    pub fn new(spec: &MarginalSpec, alpha: AlphaSequence) -> Result<Self> {
        let spec = spec.validated()?;
        let basis = OrthoBasis::new(&spec, MAX_RECURRENCE_DEGREE)?;
        Ok(TransitionKernel { spec, basis, alpha, tolerance: DEFAULT_TAIL_TOLERANCE, use_closed_form: true })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(SmprError::InvalidParameter(format!("tail tolerance must be positive, got {tolerance}")));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    /// Whether [`TransitionKernel::ratio`] may use a closed form.
    pub fn with_closed_form(mut self, on: bool) -> Self {
        self.use_closed_form = on;
        self
    }

    pub fn uses_closed_form(&self) -> bool {
        self.use_closed_form
    }

    pub fn spec(&self) -> &MarginalSpec {
        &self.spec
    }

    pub fn basis(&self) -> &OrthoBasis {
        &self.basis
    }

    pub fn alpha(&self) -> &AlphaSequence {
        &self.alpha
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Highest index the series may reach.
    pub fn max_terms(&self) -> usize {
        let cap = self.basis.degree();
        self.alpha.max_index().map_or(cap, |m| m.min(cap))
    }

    /// The closed form matching this (marginal, rate family) pair.
    pub fn closed_form(&self) -> Option<ClosedForm> {
        let family = self.alpha.family()?;
        match (self.spec, family) {
            (MarginalSpec::Gaussian, RateFamily::Linear) => Some(ClosedForm::Mehler),
            (MarginalSpec::QNormal { q }, RateFamily::Linear) if q >= 1.0 => Some(ClosedForm::Mehler),
            (MarginalSpec::Gamma { shape }, RateFamily::Linear) => Some(ClosedForm::HardyHille { shape }),
            (MarginalSpec::Arcsine, RateFamily::Square) => Some(ClosedForm::ArcsineTheta),
            (MarginalSpec::Semicircle { radius }, RateFamily::Shifted) => Some(ClosedForm::SemicircleTheta { radius }),
            _ => None,
        }
    }

    /// Terms `e^{-α_n t} h_n(x) h_n(y)` and bounds `e^{-α_n t} max(h_n(x)², h_n(y)²)`,
    /// scanned until eight consecutive bounds fall below a thousandth of the
    /// tolerance or the index cap is reached. The flag tells which.
    fn scan(&self, x: f64, y: f64, t: f64) -> (Vec<f64>, Vec<f64>, bool) {
        let cap = self.max_terms();
        let scale = self.alpha.scale();
        let mut terms = Vec::with_capacity(64);
        let mut bounds = Vec::with_capacity(64);
        let (mut px, mut py) = (0.0, 0.0);
        let (mut hx, mut hy) = (1.0f64, 1.0f64);
        let mut quiet = 0;
        let mut n = 0;
        loop {
            let rate = self.alpha.ratio(n).expect("index within the rate list") * scale;
            let w = (-rate * t).exp();
            terms.push(w * hx * hy);
            let b = w * (hx * hx).max(hy * hy);
            bounds.push(b);
            quiet = if b < 1e-3 * self.tolerance { quiet + 1 } else { 0 };
            if quiet >= 8 || n == cap {
                return (terms, bounds, quiet >= 8);
            }
            let (a_next, a_n, b_n) = (self.basis.offdiag(n + 1), self.basis.offdiag(n), self.basis.diag(n));
            let nx = ((x - b_n) * hx - a_n * px) / a_next;
            let ny = ((y - b_n) * hy - a_n * py) / a_next;
            px = hx;
            py = hy;
            hx = nx;
            hy = ny;
            n += 1;
        }
    }

    /// Tail bound after `N` terms for each scanned `N`: the largest scanned
    /// bound at index `>= N`. Nonincreasing in `N`.
    pub fn tail_bounds(&self, x: f64, y: f64, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let (_, bounds, _) = self.scan(x, y, t);
        Ok(suffix_max(&bounds))
    }

    /// Truncated Lancaster series `Σ_{n<N} e^{-α_n t} h_n(x) h_n(y)`, with `N`
    /// the first index past which every scanned bound is below the tolerance.
    ///
    /// An explicit finite rate list ends the series at its last index.
    pub fn lancaster_ratio(&self, x: f64, y: f64, t: f64) -> Result<SeriesValue> {
        check_time(t)?;
        let complete = self.alpha.max_index().is_some_and(|m| m <= self.basis.degree());
        let (terms, bounds, quiet) = self.scan(x, y, t);
        let suffix = suffix_max(&bounds);
        if !quiet && complete {
            return Ok(SeriesValue { value: terms.iter().sum(), terms: terms.len(), bound: 0.0 });
        }
        if !quiet {
            let tail = bounds[bounds.len().saturating_sub(8)..].iter().cloned().fold(0.0, f64::max);
            if tail >= self.tolerance {
                return Err(SmprError::Truncation { tolerance: self.tolerance, terms: bounds.len(), bound: tail });
            }
        }
        let stop = (1..=bounds.len()).find(|&i| suffix[i] < self.tolerance).unwrap_or(bounds.len());
        Ok(SeriesValue { value: terms[..stop].iter().sum(), terms: stop, bound: suffix[stop] })
    }

    /// The closed-form ratio `dη/dμ`, if one exists for this model.
    pub fn closed_ratio(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        let a1 = self.alpha.scale();
        match self.closed_form() {
            Some(ClosedForm::Mehler) => Ok(mehler_ratio(x, y, t, a1)),
            Some(ClosedForm::HardyHille { shape }) => hardy_hille(x, y, t, a1, shape),
            Some(ClosedForm::ArcsineTheta) => arcsine_ratio(x, y, t, a1),
            Some(ClosedForm::SemicircleTheta { radius }) => {
                semicircle_ratio(x / radius, y / radius, t, a1 / 3.0)
            }
            None => Err(SmprError::Unsupported {
                family: self.spec.family().name(),
                what: "closed-form kernel for these rates".into(),
            }),
        }
    }

    /// `dη/dμ (x, y)`: the closed form when available and enabled, the series otherwise.
    pub fn ratio(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        if self.use_closed_form && self.closed_form().is_some() {
            self.closed_ratio(x, y, t)
        } else {
            self.lancaster_ratio(x, y, t).map(|s| s.value)
        }
    }

    /// Transition density `η(x | y, t) = ratio(x, y, t) f(x)`.
    pub fn density(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let f = self.spec.density(x);
        if f == 0.0 {
            return Ok(0.0);
        }
        Ok(self.ratio(x, y, t)? * f)
    }

    /// Bivariate density `ratio(x, y, t) f(x) f(y)`.
    pub fn bivariate_density(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        Ok(self.density(x, y, t)? * self.spec.density(y))
    }
}

fn suffix_max(bounds: &[f64]) -> Vec<f64> {
    let mut suffix = vec![0.0f64; bounds.len() + 1];
    for i in (0..bounds.len()).rev() {
        suffix[i] = suffix[i + 1].max(bounds[i]);
    }
    suffix
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(SmprError::InvalidParameter(format!("time must be positive, got {t}")))
    }
}

fn mehler_ratio(x: f64, y: f64, t: f64, alpha1: f64) -> f64 {
    let rho = (-alpha1 * t).exp();
    let one_minus = -(-2.0 * alpha1 * t).exp_m1();
    (-(rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * one_minus)).exp() / one_minus.sqrt()
}

/// Bivariate standard Gaussian density with correlation `ρ = e^{-α₁ t}`.
pub fn mehler_closed(x: f64, y: f64, t: f64, alpha1: f64) -> Result<f64> {
    check_time(t)?;
    if !(alpha1 > 0.0) {
        return Err(SmprError::InvalidParameter(format!("rate must be positive, got {alpha1}")));
    }
    let rho = (-alpha1 * t).exp();
    let one_minus = -(-2.0 * alpha1 * t).exp_m1();
    Ok((-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * one_minus)).exp() / (2.0 * PI * one_minus.sqrt()))
}

/// Hardy-Hille kernel: the ratio `Σ e^{-nα₁t} h_n(x) h_n(y)` for the Gamma
/// law with shape `β`,
/// `Γ(β) / ((1-ρ)(xyρ)^{(β-1)/2}) · exp(-(x+y)ρ/(1-ρ)) · I_{β-1}(2sqrt(ρxy)/(1-ρ))`.
pub fn hardy_hille(x: f64, y: f64, t: f64, alpha1: f64, beta: f64) -> Result<f64> {
    check_time(t)?;
    if !(x > 0.0 && y > 0.0) {
        return Err(SmprError::Domain(format!("Hardy-Hille kernel needs x, y > 0, got ({x}, {y})")));
    }
    if !(beta > 0.0) {
        return Err(SmprError::InvalidParameter(format!("shape must be positive, got {beta}")));
    }
    let lr = -alpha1 * t;
    let rho = lr.exp();
    let one_minus = -lr.exp_m1();
    let z = 2.0 * (rho * x * y).sqrt() / one_minus;
    let ln = ln_gamma(beta) - one_minus.ln() - 0.5 * (beta - 1.0) * ((x * y).ln() + lr) - (x + y) * rho / one_minus
        + ln_bessel_i(beta - 1.0, z)?;
    Ok(ln.exp())
}

fn check_open_unit(x: f64, y: f64) -> Result<(f64, f64)> {
    if x.abs() < 1.0 && y.abs() < 1.0 {
        Ok((x.acos(), y.acos()))
    } else {
        Err(SmprError::Domain(format!("kernel needs |x|, |y| < 1, got ({x}, {y})")))
    }
}

fn arcsine_ratio(x: f64, y: f64, t: f64, alpha1: f64) -> Result<f64> {
    let (a, b) = check_open_unit(x, y)?;
    let tau = alpha1 * t;
    Ok(0.5 * (theta_log_nome(tau, 0.5 * (a - b)) + theta_log_nome(tau, 0.5 * (a + b))))
}

/// Arcsine transition density for rates `α₁ n²`:
/// `f(x) (θ(ρ; (a-b)/2) + θ(ρ; (a+b)/2)) / 2` with `ρ = e^{-α₁t}`,
/// `a = arccos x`, `b = arccos y`.
pub fn arcsine_kernel(x: f64, y: f64, t: f64, alpha1: f64) -> Result<f64> {
    check_time(t)?;
    Ok(arcsine_ratio(x, y, t, alpha1)? / (PI * (1.0 - x * x).sqrt()))
}

fn semicircle_ratio(x: f64, y: f64, t: f64, alpha: f64) -> Result<f64> {
    let (a, b) = check_open_unit(x, y)?;
    let tau = alpha * t;
    let diff = theta_difference(tau, a, b);
    Ok(diff * tau.exp() / (4.0 * a.sin() * b.sin()))
}

/// Unit-radius semicircle transition density for rates `α n(n+2)`:
/// `(θ(ρ; (a-b)/2) - θ(ρ; (a+b)/2)) / (2π ρ sqrt(1-y²))` with `ρ = e^{-αt}`.
pub fn semicircle_kernel(x: f64, y: f64, t: f64, alpha: f64) -> Result<f64> {
    check_time(t)?;
    let (a, b) = check_open_unit(x, y)?;
    let tau = alpha * t;
    let diff = theta_difference(tau, a, b);
    Ok(diff * tau.exp() / (2.0 * PI * b.sin()))
}
