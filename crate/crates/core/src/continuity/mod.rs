//! Path-continuity conditions on the rates `α_n`.
//!
//! A process with rates `α_n` has `E(ΔX)^{2k} = Σ D_n (1 - e^{-α_n t})`.
//! Kolmogorov's criterion wants this to be `O(t^{r+1})` with `r >= 1`, which
//! makes the first `r` Taylor coefficients vanish and gives polynomial
//! equations in the ratios `ρ_n = α_n / α_1`.

mod alpha;
mod expansion;

use serde::Serialize;

use crate::error::{Result, SmprError};
use crate::marginals::{MarginalSpec, MomentSummary};
use crate::orthopoly::{CoeffMatrix, OrthoBasis};

pub use alpha::{
    alpha_admissibility, classify_degenerate, concavity_violation, AdmissibilityReport, AlphaSequence,
    Degeneracy, HankelCheck, RateFamily, RateMomentCheck, SummabilityCheck, PSD_TOLERANCE,
};
pub use expansion::{increment_expansion, solve_alpha, AlphaRoot, ContinuityReport, IncrementExpansion};

/// Agreement required between the two forms of the continuity coefficient.
pub const FORM_AGREEMENT: f64 = 1e-12;

/// The two forms of the continuity coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityCoefficient {
    /// `(12 + 4κ - 3s²) / (6 + 3κ - 3s²)`.
    pub shape_form: f64,
    /// `(4 m4 m2 - 3 m3²) / (3 (m4 m2 - m3² - m2³))`.
    pub moment_form: f64,
}

/// Both forms, checked against each other.
pub fn continuity_coefficients(summary: &MomentSummary) -> Result<ContinuityCoefficient> {
    let (s, kappa) = (summary.skewness, summary.excess_kurtosis);
    let den = 6.0 + 3.0 * kappa - 3.0 * s * s;
    let (m2, m3, m4) = (summary.m2(), summary.m3(), summary.m4());
    let raw_den = m4 * m2 - m3 * m3 - m2.powi(3);
    if den.abs() <= 1e-12 * (6.0 + 3.0 * kappa.abs() + 3.0 * s * s) || raw_den <= 0.0 {
        return Err(SmprError::Degenerate(
            "two-point-like marginal: m4 m2 = m3^2 + m2^3, so c_22 = 0".into(),
        ));
    }
    let shape_form = (12.0 + 4.0 * kappa - 3.0 * s * s) / den;
    let moment_form = (4.0 * m4 * m2 - 3.0 * m3 * m3) / (3.0 * raw_den);
    if (shape_form - moment_form).abs() > FORM_AGREEMENT * shape_form.abs().max(1.0) {
        return Err(SmprError::NoConvergence(format!(
            "continuity coefficient forms disagree: {shape_form} vs {moment_form}"
        )));
    }
    Ok(ContinuityCoefficient { shape_form, moment_form })
}

/// The continuity coefficient `C`.
pub fn continuity_coefficient(summary: &MomentSummary) -> Result<f64> {
    continuity_coefficients(summary).map(|c| c.shape_form)
}

/// Moment summary of `Beta(γ, β)` on `[0, 1]`, from the raw moments
/// `E X^j = Π_{i<j} (γ + i) / (γ + β + i)`.
pub fn beta_summary(gamma: f64, beta: f64) -> Result<MomentSummary> {
    if !(gamma > 0.0 && beta > 0.0 && gamma.is_finite() && beta.is_finite()) {
        return Err(SmprError::InvalidParameter(format!("Beta parameters must be positive, got ({gamma}, {beta})")));
    }
    let raw: Vec<f64> = (0..=4)
        .scan(1.0, |acc, j| {
            let out = *acc;
            *acc *= (gamma + j as f64) / (gamma + beta + j as f64);
            Some(out)
        })
        .collect();
    let nu = raw[1];
    let central: Vec<f64> = (0..=4)
        .map(|j| {
            (0..=j)
                .map(|i| crate::marginals::binomial(j, i) * raw[i] * (-nu).powi((j - i) as i32))
                .sum()
        })
        .collect();
    let m2 = central[2];
    Ok(MomentSummary {
        mean: nu,
        skewness: central[3] / m2.powf(1.5),
        excess_kurtosis: central[4] / (m2 * m2) - 3.0,
        central: {
            let mut c = central;
            c[1] = 0.0;
            c
        },
    })
}

/// `E(X_{τ+t}^j | X_τ = y) = Σ_{n<=j} c_{j,n} e^{-α_n t} h_n(y)`.
pub fn conditional_moment(
    c: &CoeffMatrix,
    basis: &OrthoBasis,
    alpha: &AlphaSequence,
    j: usize,
    y: f64,
    t: f64,
) -> Result<f64> {
    if j > c.order() || j > basis.degree() {
        return Err(SmprError::OutOfRange { index: j, max: c.order().min(basis.degree()) });
    }
    if !(t >= 0.0) {
        return Err(SmprError::InvalidParameter(format!("time must be nonnegative, got {t}")));
    }
    let rates = alpha.rates(j)?;
    let mut h = vec![0.0; j + 1];
    basis.eval_all(y, &mut h);
    Ok((0..=j).map(|n| c.get(j, n) * (-rates[n] * t).exp() * h[n]).sum())
}

/// True when the support is unbounded and `C = 2`, which forces `ρ_n = n`.
pub fn harness_detect(report: &ContinuityReport, spec: &MarginalSpec) -> bool {
    !spec.support().is_bounded() && (report.continuity_coefficient - 2.0).abs() <= 1e-10
}

#[cfg(test)]
mod tests;
