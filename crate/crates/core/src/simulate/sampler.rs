//! Inverse-CDF sampling from a transition density.

use serde::Serialize;

use crate::error::{Result, SmprError};
use crate::kernels::TransitionKernel;
use crate::orthopoly::{basis_from_moments, CoeffMatrix, OrthoBasis};

/// Smallest accepted CDF grid.
pub const MIN_GRID: usize = 256;

/// Default CDF grid.
pub const DEFAULT_GRID: usize = 512;

/// Largest clipped negative mass, as a fraction of the total, before sampling aborts.
pub const MAX_CLIPPED: f64 = 1e-4;

/// Half-width of the tabulation window in conditional standard deviations.
pub const WINDOW_SDS: f64 = 12.0;

/// Conditional CDF of `η(·|y,t)` tabulated on a grid.
///
/// Cell masses are `ratio(mid, y, t) · μ(cell)`, which stays finite where the
/// marginal density does not. Negative masses from series truncation are
/// clipped to zero. Between the cell edges the CDF is a monotone cubic
/// (Fritsch-Carlson).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionTable {
    pub y: f64,
    pub t: f64,
    pub edges: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Derivative of the interpolated CDF at each edge.
    slopes: Vec<f64>,
    /// Clipped negative mass over total absolute mass.
    pub clipped: f64,
}

/// Precomputed data for repeated sampling from one kernel.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    kernel: &'a TransitionKernel,
    grid: usize,
    c: CoeffMatrix,
    basis: OrthoBasis,
}

impl<'a> Sampler<'a> {
    pub fn new(kernel: &'a TransitionKernel, grid: usize) -> Result<Self> {
        if grid < MIN_GRID {
            return Err(SmprError::InvalidParameter(format!("CDF grid must have at least {MIN_GRID} cells, got {grid}")));
        }
        let c = basis_from_moments(kernel.spec(), 2)?;
        let basis = OrthoBasis::from_coeffs(*kernel.spec(), &c);
        Ok(Sampler { kernel, grid, c, basis })
    }

    pub fn kernel(&self) -> &TransitionKernel {
        self.kernel
    }

    /// Conditional mean and variance of `X_{τ+t}` given `X_τ = y`.
    pub fn conditional_mean_var(&self, y: f64, t: f64) -> (f64, f64) {
        let alpha = self.kernel.alpha();
        let decay = |n: usize| alpha.rate(n).map_or(0.0, |a| (-a * t).exp());
        let mut h = [0.0; 3];
        self.basis.eval_all(y, &mut h);
        let moment = |j: usize| (0..=j).map(|n| self.c.get(j, n) * decay(n) * h[n]).sum::<f64>();
        let mean = moment(1);
        (mean, (moment(2) - mean * mean).max(0.0))
    }

    /// Tabulates the conditional CDF over `mean ± 12 sd`, cut to the sampling range.
    pub fn table(&self, y: f64, t: f64) -> Result<TransitionTable> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(SmprError::InvalidParameter(format!("time must be positive, got {t}")));
        }
        let spec = self.kernel.spec();
        let range = spec.sampling_range();
        let (mean, var) = self.conditional_mean_var(y, t);
        let half = WINDOW_SDS * var.sqrt();
        let lower = (mean - half).max(range.lower);
        let upper = (mean + half).min(range.upper);
        if !(upper > lower) {
            return Err(SmprError::Degenerate(format!("empty sampling window at y = {y}, t = {t}")));
        }
        let m = self.grid;
        let w = (upper - lower) / m as f64;
        let edges: Vec<f64> = (0..=m).map(|i| if i == m { upper } else { lower + w * i as f64 }).collect();
        let mut masses = Vec::with_capacity(m);
        let mut prev_f = spec.cdf(edges[0]);
        for i in 0..m {
            let next_f = spec.cdf(edges[i + 1]);
            let mid = 0.5 * (edges[i] + edges[i + 1]);
            let mass = self.kernel.ratio(mid, y, t)? * (next_f - prev_f).max(0.0);
            masses.push(mass);
            prev_f = next_f;
        }
        let total_abs: f64 = masses.iter().map(|v| v.abs()).sum();
        let negative: f64 = masses.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
        let clipped = if total_abs > 0.0 { negative / total_abs } else { 0.0 };
        if clipped > MAX_CLIPPED {
            return Err(SmprError::NegativeMass { clipped, allowed: MAX_CLIPPED, y, t });
        }
        let total: f64 = masses.iter().map(|v| v.max(0.0)).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(SmprError::Degenerate(format!("no transition mass at y = {y}, t = {t}")));
        }
        let mut cdf = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for v in &masses {
            acc += v.max(0.0) / total;
            cdf.push(acc.min(1.0));
        }
        cdf[m] = 1.0;
        let slopes = pchip_slopes(&edges, &cdf);
        Ok(TransitionTable { y, t, edges, cdf, slopes, clipped })
    }

    /// `x` with `F(x | y, t) = u`.
    pub fn sample(&self, y: f64, t: f64, u: f64) -> Result<f64> {
        self.table(y, t)?.invert(u)
    }
}

/// Fritsch-Carlson derivatives for monotone cubic interpolation.
fn pchip_slopes(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (f[i + 1] - f[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = end_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
    d[n - 1] = end_slope(
        h[n - 2],
        if n > 2 { h[n - 3] } else { h[n - 2] },
        delta[n - 2],
        if n > 2 { delta[n - 3] } else { delta[n - 2] },
    );
    d
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

impl TransitionTable {
    fn hermite(&self, i: usize, x: f64) -> f64 {
        let (x0, x1) = (self.edges[i], self.edges[i + 1]);
        let h = x1 - x0;
        let s = (x - x0) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.cdf[i]
            + (s3 - 2.0 * s2 + s) * h * self.slopes[i]
            + (-2.0 * s3 + 3.0 * s2) * self.cdf[i + 1]
            + (s3 - s2) * h * self.slopes[i + 1]
    }

    /// Interpolated CDF at `x`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let last = self.edges.len() - 1;
        if x <= self.edges[0] {
            return 0.0;
        }
        if x >= self.edges[last] {
            return 1.0;
        }
        let i = self.edges.partition_point(|&e| e <= x) - 1;
        self.hermite(i.min(last - 1), x)
    }

    /// Inverse of the interpolated CDF, by bisection inside the bracketing cell.
    pub fn invert(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(SmprError::InvalidParameter(format!("uniform draw must lie in (0, 1), got {u}")));
        }
        // first cell whose upper CDF value reaches u; empty cells are skipped
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1) - 1;
        let (mut lo, mut hi) = (self.edges[i], self.edges[i + 1]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(i, mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * mid.abs().max(1e-300) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// `x` with `F(x | y, t) = u`, tabulated on the default grid.
pub fn transition_sample(kernel: &TransitionKernel, y: f64, t: f64, u: f64) -> Result<f64> {
    Sampler::new(kernel, DEFAULT_GRID)?.sample(y, t, u)
}
