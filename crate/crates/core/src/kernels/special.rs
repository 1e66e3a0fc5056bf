//! Modified Bessel functions of the first kind and Jacobi theta functions.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, SmprError};

/// Largest argument accepted by [`bessel_i`]; beyond it `I_ν` overflows.
pub const BESSEL_MAX_ARG: f64 = 700.0;

/// `ln I_ν(z)` for `z >= 0`, `ν > -1`.
///
/// Power series summed in log space for moderate `z`, the large-argument
/// asymptotic expansion when `z > max(30, ν²)`.
pub fn ln_bessel_i(nu: f64, z: f64) -> Result<f64> {
    if !(nu > -1.0) || !nu.is_finite() {
        return Err(SmprError::Domain(format!("Bessel order must exceed -1, got {nu}")));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(SmprError::Domain(format!("Bessel argument must be finite and nonnegative, got {z}")));
    }
    if z == 0.0 {
        return Ok(if nu == 0.0 { 0.0 } else if nu > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY });
    }
    if z > 30f64.max(nu * nu) {
        if let Some(v) = ln_bessel_asymptotic(nu, z) {
            return Ok(v);
        }
    }
    Ok(ln_bessel_series(nu, z))
}

fn ln_bessel_series(nu: f64, z: f64) -> f64 {
    let lz = (0.5 * z).ln();
    let ln_term = |m: f64| (2.0 * m + nu) * lz - ln_gamma(m + 1.0) - ln_gamma(m + nu + 1.0);
    // terms peak near m = z/2; sum relative to the peak
    let peak_m = (0.5 * z).floor().max(0.0);
    let peak = ln_term(peak_m);
    let mut sum = 0.0;
    let mut m = 0.0;
    loop {
        let r = (ln_term(m) - peak).exp();
        sum += r;
        if m > peak_m && r < 1e-18 * sum {
            break;
        }
        m += 1.0;
    }
    peak + sum.ln()
}

fn ln_bessel_asymptotic(nu: f64, z: f64) -> Option<f64> {
    // I_ν(z) ~ e^z / sqrt(2πz) Σ_k (-1)^k a_k(ν) / z^k
    let mu = 4.0 * nu * nu;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..200 {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf * z);
        if next.abs() >= term.abs() {
            // divergent tail begins; accept only if already converged
            return (term.abs() < 1e-17 * sum.abs()).then(|| z - 0.5 * (2.0 * PI * z).ln() + sum.ln());
        }
        term = next;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            return Some(z - 0.5 * (2.0 * PI * z).ln() + sum.ln());
        }
    }
    None
}

/// `I_ν(z) = Σ_m (z/2)^{2m+ν} / (m! Γ(m+ν+1))`.
pub fn bessel_i(nu: f64, z: f64) -> Result<f64> {
    if z > BESSEL_MAX_ARG {
        return Err(SmprError::Domain(format!("Bessel argument {z} exceeds the cap {BESSEL_MAX_ARG}")));
    }
    ln_bessel_i(nu, z).map(f64::exp)
}

/// Nome and phase of `θ(q; α) = 1 + 2 Σ_{j>=1} q^{j²} cos(2jα)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaParams {
    pub q: f64,
    pub alpha: f64,
}

fn check_nome(q: f64) -> Result<()> {
    if (0.0..1.0).contains(&q) {
        Ok(())
    } else {
        Err(SmprError::Domain(format!("theta nome must lie in [0, 1), got {q}")))
    }
}

/// Direct series, summed until `q^{j²} < 1e-18`.
pub fn jacobi_theta(p: ThetaParams) -> Result<f64> {
    check_nome(p.q)?;
    if p.q == 0.0 {
        return Ok(1.0);
    }
    let lq = p.q.ln();
    let mut sum = 0.0;
    let mut j = 1.0f64;
    loop {
        let w = (lq * j * j).exp();
        if w < 1e-18 {
            break;
        }
        sum += w * (2.0 * j * p.alpha).cos();
        j += 1.0;
    }
    Ok(1.0 + 2.0 * sum)
}

/// `Π_m (1 - q^{2m})(1 + 2cos(2α) q^{2m-1} + q^{4m-2})`, stopped once both
/// factors are within `1e-17` of 1.
pub fn theta_triple_product(p: ThetaParams) -> Result<f64> {
    check_nome(p.q)?;
    let c = 2.0 * (2.0 * p.alpha).cos();
    let mut prod = 1.0;
    let mut odd = p.q; // q^{2m-1}
    loop {
        let even = odd * p.q; // q^{2m}
        let f1 = 1.0 - even;
        let f2 = 1.0 + c * odd + odd * odd;
        prod *= f1 * f2;
        if (1.0 - f1).abs() < 1e-17 && (f2 - 1.0).abs() < 1e-17 {
            break;
        }
        odd *= p.q * p.q;
    }
    Ok(prod)
}

/// `θ(e^{-τ}; α)` for `τ > 0`.
///
/// For `τ < π` the dual series from the imaginary transformation,
/// `sqrt(π/τ) Σ_k exp(-(α + kπ)² / τ)`, converges faster than the direct one.
pub fn theta_log_nome(tau: f64, alpha: f64) -> f64 {
    debug_assert!(tau > 0.0);
    if tau >= PI {
        let mut sum = 0.0;
        let mut j = 1.0f64;
        loop {
            let w = (-tau * j * j).exp();
            if w < 1e-18 {
                break;
            }
            sum += w * (2.0 * j * alpha).cos();
            j += 1.0;
        }
        return 1.0 + 2.0 * sum;
    }
    let a = alpha.rem_euclid(PI);
    let mut sum = 0.0;
    // k = 0, -1 are the nearest images; walk outwards until negligible
    for dir in [1.0, -1.0] {
        let mut k = if dir > 0.0 { 0.0 } else { -1.0 };
        loop {
            let w = (-(a + k * PI).powi(2) / tau).exp();
            sum += w;
            if w < 1e-18 * sum.max(f64::MIN_POSITIVE) || w == 0.0 {
                break;
            }
            k += dir;
        }
    }
    (PI / tau).sqrt() * sum
}

/// `θ(e^{-τ}; (a-b)/2) - θ(e^{-τ}; (a+b)/2)`.
///
/// For `τ >= π` this is summed as `4 Σ_j e^{-τj²} sin(ja) sin(jb)`, which
/// avoids the cancellation between two values close to 1.
pub fn theta_difference(tau: f64, a: f64, b: f64) -> f64 {
    if tau < PI {
        return theta_log_nome(tau, 0.5 * (a - b)) - theta_log_nome(tau, 0.5 * (a + b));
    }
    let mut sum = 0.0f64;
    let mut j = 1.0f64;
    loop {
        let w = (-tau * j * j).exp();
        if w < 1e-18 * sum.abs() || w == 0.0 {
            break;
        }
        sum += w * (j * a).sin() * (j * b).sin();
        j += 1.0;
    }
    4.0 * sum
}
