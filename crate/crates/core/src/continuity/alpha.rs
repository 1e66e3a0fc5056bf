use serde::{Deserialize, Serialize};

use crate::error::{Result, SmprError};
use crate::marginals::{min_scaled_eigenvalue, MarginalSpec};
use crate::orthopoly::basis_from_moments;

/// Named rate families, `ρ_n = α_n / α_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateFamily {
    /// `ρ_n = n` (harness).
    #[serde(rename = "n")]
    Linear,
    /// `ρ_n = n^2`.
    #[serde(rename = "n^2")]
    Square,
    /// `ρ_n = n(n+2)/3`.
    #[serde(rename = "n(n+2)/3")]
    Shifted,
}

impl RateFamily {
    pub fn ratio(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            RateFamily::Linear => n,
            RateFamily::Square => n * n,
            RateFamily::Shifted => n * (n + 2.0) / 3.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RateFamily::Linear => "n",
            RateFamily::Square => "n^2",
            RateFamily::Shifted => "n(n+2)/3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.replace(' ', "").as_str() {
            "n" | "linear" => Ok(RateFamily::Linear),
            "n^2" | "n2" | "square" => Ok(RateFamily::Square),
            "n(n+2)/3" | "shifted" => Ok(RateFamily::Shifted),
            other => Err(SmprError::InvalidParameter(format!(
                "unknown rate family '{other}' (expected n, n^2 or n(n+2)/3)"
            ))),
        }
    }
}

/// The rates `α_n = scale · ρ_n`, with `ρ_0 = 0` and `ρ_1 = 1`.
///
/// A named family defines every rate. An explicit list defines `ρ_1 ..= ρ_N`
/// only; Lancaster series over such a sequence stop at `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSequence {
    scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<RateFamily>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    ratios: Vec<f64>,
}

impl AlphaSequence {
    pub fn from_family(family: RateFamily, scale: f64) -> Result<Self> {
        check_scale(scale)?;
        Ok(AlphaSequence { scale, family: Some(family), ratios: Vec::new() })
    }

    /// Explicit `ρ_1 ..= ρ_N`; `ρ_1` must be 1 and every ratio positive.
    pub fn explicit(ratios: Vec<f64>, scale: f64) -> Result<Self> {
        check_scale(scale)?;
        match ratios.first() {
            None => return Err(SmprError::InvalidParameter("empty ratio list".into())),
            Some(&r) if (r - 1.0).abs() > 1e-12 => {
                return Err(SmprError::InvalidParameter(format!("first ratio must be 1, got {r}")))
            }
            _ => {}
        }
        if let Some(bad) = ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(SmprError::InvalidParameter(format!("ratios must be positive, got {bad}")));
        }
        let mut ratios = ratios;
        ratios[0] = 1.0;
        Ok(AlphaSequence { scale, family: None, ratios })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn family(&self) -> Option<RateFamily> {
        self.family
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        check_scale(scale)?;
        Ok(AlphaSequence { scale, ..self.clone() })
    }

    /// Largest defined index, `None` when every index is defined.
    pub fn max_index(&self) -> Option<usize> {
        match self.family {
            Some(_) => None,
            None => Some(self.ratios.len()),
        }
    }

    /// `ρ_n`, or `None` past the end of an explicit list.
    pub fn ratio(&self, n: usize) -> Option<f64> {
        if n == 0 {
            return Some(0.0);
        }
        match self.family {
            Some(f) => Some(f.ratio(n)),
            None => self.ratios.get(n - 1).copied(),
        }
    }

    /// `α_n = scale · ρ_n`.
    pub fn rate(&self, n: usize) -> Option<f64> {
        self.ratio(n).map(|r| r * self.scale)
    }

    /// `α_0 ..= α_upto`.
    pub fn rates(&self, upto: usize) -> Result<Vec<f64>> {
        (0..=upto)
            .map(|n| {
                self.rate(n).ok_or(SmprError::OutOfRange { index: n, max: self.max_index().unwrap_or(0) })
            })
            .collect()
    }

    /// `ρ_0 ..= ρ_upto`, stopping early at the end of an explicit list.
    pub fn ratios_upto(&self, upto: usize) -> Vec<f64> {
        (0..=upto).map_while(|n| self.ratio(n)).collect()
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(SmprError::InvalidParameter(format!("rate scale must be positive, got {scale}")))
    }
}

/// Smallest scaled eigenvalue still counted as nonnegative.
pub const PSD_TOLERANCE: f64 = -1e-9;

/// `2 α_m >= α_{m-1} + α_{m+1}` for every interior `m` (with `α_0 = 0`).
/// Returns the first violating `m`.
pub fn concavity_violation(rates: &[f64]) -> Option<usize> {
    (1..rates.len().saturating_sub(1)).find(|&m| {
        let lhs = 2.0 * rates[m];
        let rhs = rates[m - 1] + rates[m + 1];
        lhs < rhs - 1e-12 * lhs.abs().max(rhs.abs())
    })
}

/// Hankel-PSD verdict for one time point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HankelCheck {
    pub t: f64,
    /// Matrix size minus one.
    pub order: usize,
    pub min_eigenvalue: f64,
    pub passed: bool,
}

/// `[e^{-α_{i+j} t}]` and shifted `[e^{-α_{i+j+1} t}]` checks at one `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateMomentCheck {
    pub t: f64,
    pub hankel: HankelCheck,
    pub shifted: HankelCheck,
    /// Leading minor `e^{-α_2 t} - e^{-2 α_1 t}`.
    pub minor_2x2: f64,
}

/// Tail-ratio verdict on `Σ e^{-2 α_n t}` at one `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummabilityCheck {
    pub t: f64,
    pub tail_ratio: f64,
    pub converges: bool,
}

/// Findings of [`alpha_admissibility`]. The Hankel tests are finite, so a
/// pass is necessary but not sufficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// Rates inspected, `α_0 ..= α_N`.
    pub rates: Vec<f64>,
    pub concave: bool,
    pub concavity_violation: Option<usize>,
    /// Whether (a) and (b) are required, i.e. the support is unbounded.
    pub unbounded_support: bool,
    pub rate_moment: Vec<RateMomentCheck>,
    pub rate_moment_passed: bool,
    /// `{m_{2j} - Σ_n (1 - e^{-α_n t}) c_{j,n}^2}_j`, the moments of `X_0 X_t`.
    pub product_moment: Vec<HankelCheck>,
    pub product_moment_passed: bool,
    pub summability: Vec<SummabilityCheck>,
    pub summable: bool,
    /// All required checks passed.
    pub consistent: bool,
    pub note: &'static str,
}

/// Number of rates inspected for named families.
const NAMED_DEPTH: usize = 16;
/// Basis degree used for the product-moment test.
const PRODUCT_DEGREE: usize = 16;
/// Index at which a named family's tail ratio is read.
const TAIL_INDEX: usize = 64;

/// Checks the necessary conditions a rate sequence must meet:
/// (a) concavity, (b) `{e^{-α_n t}}` is a moment sequence (unbounded support),
/// (c) `{E (X_0 X_t)^j}_j` is a moment sequence, (d) `Σ e^{-2 α_n t} < ∞`.
pub fn alpha_admissibility(alpha: &AlphaSequence, spec: &MarginalSpec, t_grid: &[f64]) -> Result<AdmissibilityReport> {
    let depth = alpha.max_index().unwrap_or(NAMED_DEPTH);
    if depth < 2 {
        return Err(SmprError::InvalidParameter("admissibility needs at least three rates".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(SmprError::InvalidParameter(format!("time grid entries must be positive, got {t}")));
    }
    let rates = alpha.rates(depth)?;
    let unbounded = !spec.support().is_bounded();
    let violation = concavity_violation(&rates);

    // (b): largest m with α_{2m+1} available
    let m = (depth - 1) / 2;
    let rate_moment: Vec<RateMomentCheck> = t_grid
        .iter()
        .map(|&t| {
            let e: Vec<f64> = rates.iter().map(|a| (-a * t).exp()).collect();
            let hankel = hankel_check(&e, m, 0, t);
            let shifted = hankel_check(&e, m, 1, t);
            RateMomentCheck { t, hankel, shifted, minor_2x2: e[2] - e[1] * e[1] }
        })
        .collect();
    let rate_moment_passed = rate_moment.iter().all(|c| c.hankel.passed && c.shifted.passed);

    // (c)
    let degree = PRODUCT_DEGREE.min(depth);
    let c = basis_from_moments(spec, degree)?;
    let product_moment: Vec<HankelCheck> = t_grid
        .iter()
        .map(|&t| {
            let b: Vec<f64> = (0..=degree)
                .map(|j| (0..=j).map(|n| c.get(j, n).powi(2) * (-rates[n] * t).exp()).sum())
                .collect();
            hankel_check(&b, degree / 2, 0, t)
        })
        .collect();
    let product_moment_passed = product_moment.iter().all(|c| c.passed);

    // (d)
    let (a_lo, a_hi) = match alpha.family() {
        Some(f) => (f.ratio(TAIL_INDEX) * alpha.scale(), f.ratio(TAIL_INDEX + 1) * alpha.scale()),
        None => (rates[depth - 1], rates[depth]),
    };
    let summability: Vec<SummabilityCheck> = t_grid
        .iter()
        .map(|&t| {
            let tail_ratio = (-2.0 * (a_hi - a_lo) * t).exp();
            SummabilityCheck { t, tail_ratio, converges: tail_ratio < 1.0 - 1e-12 }
        })
        .collect();
    let summable = summability.iter().all(|s| s.converges);

    let concave = violation.is_none();
    let consistent = product_moment_passed && summable && (!unbounded || (concave && rate_moment_passed));
    Ok(AdmissibilityReport {
        rates,
        concave,
        concavity_violation: violation,
        unbounded_support: unbounded,
        rate_moment,
        rate_moment_passed,
        product_moment,
        product_moment_passed,
        summability,
        summable,
        consistent,
        note: "finite Hankel checks: necessary, not sufficient",
    })
}

fn hankel_check(seq: &[f64], order: usize, shift: usize, t: f64) -> HankelCheck {
    let entries: Vec<Vec<f64>> = (0..=order)
        .map(|i| (0..=order).map(|j| seq[i + j + shift]).collect())
        .collect();
    let min_eigenvalue = min_scaled_eigenvalue(&entries);
    HankelCheck { t, order, min_eigenvalue, passed: min_eigenvalue >= PSD_TOLERANCE }
}

/// Outcome of [`classify_degenerate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Degeneracy {
    /// Point mass at `atom`; `b_n = atom^n`.
    OnePoint { atom: f64, trigger: usize, predicted: Vec<f64> },
    /// Mass `p` at `atom`, `1 - p` at `-atom`.
    TwoPoint { atom: f64, p: f64, trigger: usize, predicted: Vec<f64> },
    NonDegenerate,
}

const EQUALITY_TOLERANCE: f64 = 1e-10;

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQUALITY_TOLERANCE * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Detects moment sequences of one- and two-point laws:
/// `b_{4m+2} = b_{2m+1}^2` forces a point mass, `b_{4m} = b_{2m}^2` (`m >= 1`)
/// a law on `{-a, a}`. Equality is tested to `1e-10` relative.
pub fn classify_degenerate(b: &[f64]) -> Result<Degeneracy> {
    match b.first() {
        Some(&b0) if (b0 - 1.0).abs() <= EQUALITY_TOLERANCE => {}
        _ => return Err(SmprError::InvalidParameter("a moment sequence must start with b_0 = 1".into())),
    }
    for m in 0..=b.len() / 4 {
        if 4 * m + 2 < b.len() && nearly_equal(b[4 * m + 2], b[2 * m + 1].powi(2)) {
            let odd = b[2 * m + 1];
            let atom = odd.signum() * odd.abs().powf(1.0 / (2 * m + 1) as f64);
            let predicted = (0..b.len()).map(|n| atom.powi(n as i32)).collect();
            return Ok(Degeneracy::OnePoint { atom, trigger: 2 * m + 1, predicted });
        }
        if m >= 1 && 4 * m < b.len() && nearly_equal(b[4 * m], b[2 * m].powi(2)) {
            let atom = b[2 * m].powf(1.0 / (2 * m) as f64);
            let p = if b.len() > 1 { (b[1] + atom) / (2.0 * atom) } else { 0.5 };
            let predicted = (0..b.len())
                .map(|n| {
                    let an = atom.powi(n as i32);
                    if n % 2 == 0 {
                        an
                    } else {
                        an * (2.0 * p - 1.0)
                    }
                })
                .collect();
            return Ok(Degeneracy::TwoPoint { atom, p, trigger: 2 * m, predicted });
        }
    }
    Ok(Degeneracy::NonDegenerate)
}
