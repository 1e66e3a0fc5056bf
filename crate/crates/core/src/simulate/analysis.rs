//! Increment moments, scaling slopes, stationarity and Hölder diagnostics.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::PathEnsemble;
use crate::continuity::{increment_expansion, AlphaSequence};
use crate::error::{Result, SmprError};
use crate::format::sig17;
use crate::marginals::{raw_moments, MarginalSpec};
use crate::orthopoly::basis_from_moments;

/// Fewest usable lags for a slope fit.
pub const MIN_SLOPE_LAGS: usize = 4;

/// Sum by recursive halving; the order of additions depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Least-squares slope of `ln E(ΔX)^{2k}` against `ln t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub k: usize,
    pub slope: f64,
    pub std_error: f64,
    /// 95% interval from the Student t quantile.
    pub ci_low: f64,
    pub ci_high: f64,
    pub lags_used: usize,
}

/// `E(X_{τ+t} - X_τ)^{2k}` over a list of lags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeries {
    pub k: usize,
    pub lags: Vec<f64>,
    pub moments: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub slope: Option<SlopeFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport {
    /// `"monte_carlo"` or `"exact"`.
    pub source: String,
    pub series: Vec<MomentSeries>,
}

impl SlopeReport {
    pub fn get(&self, k: usize) -> Option<&MomentSeries> {
        self.series.iter().find(|s| s.k == k)
    }

    /// `k,t,moment,se` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t,moment,se\n");
        for s in &self.series {
            for i in 0..s.lags.len() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    s.k,
                    sig17(s.lags[i]),
                    sig17(s.moments[i]),
                    sig17(s.std_errors[i])
                ));
            }
        }
        out
    }
}

/// Geometric lags from `dt` to `0.1 / α₁`, rounded to multiples of `dt`.
/// Fails unless at least five distinct lags spanning a decade remain.
pub fn default_lags(dt: f64, alpha1: f64, count: usize) -> Result<Vec<f64>> {
    let top = 0.1 / alpha1;
    if !(dt > 0.0 && top >= 10.0 * dt * (1.0 - 1e-12)) {
        return Err(SmprError::InsufficientSamples(format!(
            "lag window [{dt}, {top}] spans less than a decade"
        )));
    }
    let max_steps = (top / dt + 1e-9).floor() as usize;
    let mut steps: Vec<usize> = (0..count.max(2))
        .map(|i| {
            let f = i as f64 / (count.max(2) - 1) as f64;
            ((max_steps as f64).powf(f)).round() as usize
        })
        .collect();
    steps.dedup();
    if steps.len() < 5 {
        return Err(SmprError::InsufficientSamples(format!("only {} distinct lags in the window", steps.len())));
    }
    Ok(steps.into_iter().map(|m| m as f64 * dt).collect())
}

fn lag_steps(ens: &PathEnsemble, lag: f64) -> Result<usize> {
    let m = (lag / ens.dt).round();
    if lag < 0.0 || (m * ens.dt - lag).abs() > 1e-9 * lag.max(ens.dt) {
        return Err(SmprError::InvalidParameter(format!("lag {lag} is not a multiple of the step {}", ens.dt)));
    }
    let m = m as usize;
    if m > ens.steps {
        return Err(SmprError::OutOfRange { index: m, max: ens.steps });
    }
    Ok(m)
}

/// Mean over all values and its delete-one-path jackknife standard error.
fn jackknife(per_path: &[(f64, usize)]) -> (f64, f64) {
    let sums: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let total = pairwise_sum(&sums);
    let count: usize = per_path.iter().map(|p| p.1).sum();
    let mean = total / count as f64;
    let p = per_path.len() as f64;
    let loo: Vec<f64> = per_path.iter().map(|&(s, n)| (total - s) / (count - n) as f64).collect();
    let loo_mean = pairwise_sum(&loo) / p;
    let dev: Vec<f64> = loo.iter().map(|v| (v - loo_mean).powi(2)).collect();
    (mean, ((p - 1.0) / p * pairwise_sum(&dev)).sqrt())
}

/// Mean of `(X_{τ+t} - X_τ)^{2k}` pooled over paths and start times, with
/// jackknife standard errors over paths.
pub fn empirical_increment_moments(ens: &PathEnsemble, k_list: &[usize], lag_list: &[f64]) -> Result<SlopeReport> {
    if ens.paths() < 2 {
        return Err(SmprError::InsufficientSamples("increment moments need at least two paths".into()));
    }
    let steps: Vec<usize> = lag_list.iter().map(|&l| lag_steps(ens, l)).collect::<Result<_>>()?;
    let mut series = Vec::with_capacity(k_list.len());
    for &k in k_list {
        if k == 0 {
            return Err(SmprError::InvalidParameter("k must be at least 1".into()));
        }
        let mut moments = Vec::with_capacity(steps.len());
        let mut ses = Vec::with_capacity(steps.len());
        for (&m, &lag) in steps.iter().zip(lag_list) {
            if m == 0 {
                moments.push(0.0);
                ses.push(0.0);
                continue;
            }
            let per_path: Vec<(f64, usize)> = ens
                .states
                .iter()
                .map(|row| {
                    let v: Vec<f64> = row.windows(m + 1).map(|w| (w[m] - w[0]).powi(2 * k as i32)).collect();
                    (pairwise_sum(&v), v.len())
                })
                .collect();
            let (mean, se) = jackknife(&per_path);
            if !(mean.is_finite() && se.is_finite()) || (mean > 0.0 && se > mean) {
                return Err(SmprError::InsufficientSamples(format!(
                    "k = {k}, lag {lag}: estimate {mean:e} has standard error {se:e}"
                )));
            }
            moments.push(mean);
            ses.push(se);
        }
        series.push(MomentSeries { k, lags: lag_list.to_vec(), moments, std_errors: ses, slope: None });
    }
    let mut report = SlopeReport { source: "monte_carlo".into(), series };
    fill_slopes(&mut report);
    Ok(report)
}

/// `E(X_{τ+t} - X_τ)^{2k}` from the increment expansion with exact moments.
pub fn exact_increment_moments(
    spec: &MarginalSpec,
    alpha: &AlphaSequence,
    k_list: &[usize],
    lag_list: &[f64],
) -> Result<SlopeReport> {
    let kmax = k_list.iter().copied().max().unwrap_or(0);
    if kmax == 0 {
        return Err(SmprError::InvalidParameter("k must be at least 1".into()));
    }
    let c = basis_from_moments(spec, 2 * kmax)?;
    let mut series = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let exp = increment_expansion(&c.truncated(2 * k), k)?;
        let rates = alpha.rates(k)?;
        let moments: Vec<f64> = lag_list.iter().map(|&t| if t == 0.0 { 0.0 } else { exp.eval_rates(&rates[1..], t) }).collect();
        series.push(MomentSeries {
            k,
            lags: lag_list.to_vec(),
            std_errors: vec![0.0; moments.len()],
            moments,
            slope: None,
        });
    }
    let mut report = SlopeReport { source: "exact".into(), series };
    fill_slopes(&mut report);
    Ok(report)
}

fn fill_slopes(report: &mut SlopeReport) {
    let fits: Vec<Option<SlopeFit>> = report.series.iter().map(|s| scaling_slope(report, s.k).ok()).collect();
    for (s, f) in report.series.iter_mut().zip(fits) {
        s.slope = f;
    }
}

/// Least-squares slope of `ln E(ΔX)^{2k}` on `ln t` over the lags with
/// positive estimates.
pub fn scaling_slope(report: &SlopeReport, k: usize) -> Result<SlopeFit> {
    let s = report.get(k).ok_or(SmprError::InvalidParameter(format!("k = {k} is not in the report")))?;
    let pts: Vec<(f64, f64)> = s
        .lags
        .iter()
        .zip(&s.moments)
        .filter(|(t, m)| **t > 0.0 && **m > 0.0 && m.is_finite())
        .map(|(t, m)| (t.ln(), m.ln()))
        .collect();
    if pts.len() < MIN_SLOPE_LAGS {
        return Err(SmprError::InsufficientSamples(format!(
            "{} usable lags for k = {k}, need {MIN_SLOPE_LAGS}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let se = (ssr / (n - 2.0) / sxx).sqrt();
    let q = StudentsT::new(0.0, 1.0, n - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(1.96);
    Ok(SlopeFit { k, slope, std_error: se, ci_low: slope - q * se, ci_high: slope + q * se, lags_used: pts.len() })
}

/// Raw moments of one time slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceMoments {
    pub step: usize,
    /// Empirical `E X^j`, `j = 1 ..= order`.
    pub moments: Vec<f64>,
    /// `(empirical - exact) / SE`; absent with a single path.
    pub z: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub order: usize,
    /// Exact `E X^j`, `j = 1 ..= order`.
    pub exact: Vec<f64>,
    pub slices: Vec<SliceMoments>,
    pub max_abs_z: Option<f64>,
    /// `(step, j)` with `|z| > 4`.
    pub flagged: Vec<(usize, usize)>,
}

/// Empirical raw moments of every time slice against the exact ones.
pub fn stationarity_check(ens: &PathEnsemble, spec: &MarginalSpec, order: usize) -> Result<StationarityReport> {
    if order == 0 || order > 8 {
        return Err(SmprError::OutOfRange { index: order, max: 8 });
    }
    let exact = raw_moments(spec, order)?[1..].to_vec();
    let p = ens.paths() as f64;
    let mut slices = Vec::with_capacity(ens.steps + 1);
    let mut flagged = Vec::new();
    let mut max_abs_z: Option<f64> = None;
    for step in 0..=ens.steps {
        let xs: Vec<f64> = ens.states.iter().map(|r| r[step]).collect();
        let mut moments = Vec::with_capacity(order);
        let mut z = Vec::with_capacity(order);
        for j in 1..=order {
            let v: Vec<f64> = xs.iter().map(|x| x.powi(j as i32)).collect();
            let mean = pairwise_sum(&v) / p;
            moments.push(mean);
            if ens.paths() < 2 {
                z.push(None);
                continue;
            }
            let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
            let se = (pairwise_sum(&dev) / (p - 1.0) / p).sqrt();
            let zj = if se > 0.0 { (mean - exact[j - 1]) / se } else { 0.0 };
            if zj.abs() > 4.0 {
                flagged.push((step, j));
            }
            max_abs_z = Some(max_abs_z.map_or(zj.abs(), |m| m.max(zj.abs())));
            z.push(Some(zj));
        }
        slices.push(SliceMoments { step, moments, z });
    }
    Ok(StationarityReport { order, exact, slices, max_abs_z, flagged })
}

/// Slope of `ln max_τ |X_{τ+h} - X_τ|` on `ln h` over dyadic lags `h`.
///
/// A heuristic: Hölder statements concern a continuous modification, not a
/// grid skeleton.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Lags `h` used.
    pub lags: Vec<f64>,
    /// Mean over paths of `ln max |ΔX|` at each lag.
    pub mean_log_max: Vec<f64>,
    /// Every path is constant.
    pub degenerate: bool,
    pub note: String,
}

pub fn holder_estimate(ens: &PathEnsemble) -> Result<HolderEstimate> {
    let mut lag_steps = Vec::new();
    let mut m = 1;
    while 2 * m <= ens.steps {
        lag_steps.push(m);
        m *= 2;
    }
    if lag_steps.len() < 2 {
        return Err(SmprError::InsufficientSamples(format!(
            "{} steps give fewer than two dyadic lag levels",
            ens.steps
        )));
    }
    let lags: Vec<f64> = lag_steps.iter().map(|&m| m as f64 * ens.dt).collect();
    let lx: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let mut slopes = Vec::with_capacity(ens.paths());
    let mut sum_log = vec![0.0; lags.len()];
    let mut live = 0usize;
    for row in &ens.states {
        let maxes: Vec<f64> = lag_steps
            .iter()
            .map(|&m| row.windows(m + 1).map(|w| (w[m] - w[0]).abs()).fold(0.0, f64::max))
            .collect();
        if maxes.contains(&0.0) {
            slopes.push(0.0);
            continue;
        }
        live += 1;
        let ly: Vec<f64> = maxes.iter().map(|v| v.ln()).collect();
        for (acc, v) in sum_log.iter_mut().zip(&ly) {
            *acc += v;
        }
        let my = ly.iter().sum::<f64>() / ly.len() as f64;
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        slopes.push(sxy / sxx);
    }
    let p = slopes.len() as f64;
    let estimate = pairwise_sum(&slopes) / p;
    let dev: Vec<f64> = slopes.iter().map(|s| (s - estimate).powi(2)).collect();
    let std_error = if slopes.len() > 1 { (pairwise_sum(&dev) / (p - 1.0) / p).sqrt() } else { 0.0 };
    let mean_log_max = sum_log.iter().map(|s| if live > 0 { s / live as f64 } else { f64::NEG_INFINITY }).collect();
    Ok(HolderEstimate {
        estimate,
        std_error,
        ci_low: estimate - 1.96 * std_error,
        ci_high: estimate + 1.96 * std_error,
        lags,
        mean_log_max,
        degenerate: live == 0,
        note: "heuristic: grid skeleton, not the continuous modification".into(),
    })
}

/// Cross moments `E X_τ^i X_{τ+t}^j` against `E X_τ^j X_{τ+t}^i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversibilityReport {
    pub lag: f64,
    /// `(i, j, difference, standard error)` for `i < j`.
    pub pairs: Vec<(usize, usize, f64, f64)>,
    pub max_abs_z: f64,
}

pub fn reversibility_check(ens: &PathEnsemble, lag: f64, max_order: usize) -> Result<ReversibilityReport> {
    if ens.paths() < 2 {
        return Err(SmprError::InsufficientSamples("reversibility needs at least two paths".into()));
    }
    let m = lag_steps(ens, lag)?;
    let mut pairs = Vec::new();
    let mut max_abs_z = 0.0f64;
    for i in 1..=max_order {
        for j in i + 1..=max_order {
            let per_path: Vec<(f64, usize)> = ens
                .states
                .iter()
                .map(|row| {
                    let v: Vec<f64> = row
                        .windows(m + 1)
                        .map(|w| w[0].powi(i as i32) * w[m].powi(j as i32) - w[0].powi(j as i32) * w[m].powi(i as i32))
                        .collect();
                    (pairwise_sum(&v), v.len())
                })
                .collect();
            let (d, se) = jackknife(&per_path);
            if se > 0.0 {
                max_abs_z = max_abs_z.max((d / se).abs());
            }
            pairs.push((i, j, d, se));
        }
    }
    Ok(ReversibilityReport { lag, pairs, max_abs_z })
}
