//! Numerical checks on a transition kernel: positivity, semigroup and
//! martingale identities, row integrals and the closed-form/series duality.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::Serialize;

use super::{ClosedForm, TransitionKernel};
use crate::error::{Result, SmprError};
use crate::marginals::Support;
use crate::quadrature::{integrate, GaussRule};

/// Nodes of the Gauss rules used by the semigroup and martingale checks.
pub const CHECK_NODES: usize = 64;

/// Nodes of the Gauss rule for row integrals on bounded supports.
pub const ROW_NODES: usize = 256;

/// Minimum of the Lancaster ratio over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub min: f64,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub grid: usize,
    pub times: Vec<f64>,
    /// `min < -tolerance`: not admissible at this resolution.
    pub flagged: bool,
}

/// Uniform grid of `n` points over `range`, endpoints included.
pub fn grid_points(range: Support, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (range.lower + range.upper)];
    }
    let h = (range.upper - range.lower) / (n - 1) as f64;
    (0..n).map(|i| range.lower + h * i as f64).collect()
}

/// Scans the Lancaster ratio over `grid × grid × t_list` on the evaluation
/// range. Rows run in parallel; ties for the minimum go to the smallest
/// `(t, row, column)` index.
pub fn positivity_scan(kernel: &TransitionKernel, grid: usize, t_list: &[f64]) -> Result<PositivityReport> {
    if grid == 0 || t_list.is_empty() {
        return Err(SmprError::InvalidParameter("positivity scan needs a nonempty grid and time list".into()));
    }
    let pts = grid_points(kernel.spec().evaluation_range(), grid);
    let rows: Vec<(usize, usize)> = (0..t_list.len()).flat_map(|k| (0..grid).map(move |i| (k, i))).collect();
    let mins = rows
        .par_iter()
        .map(|&(k, i)| {
            let mut best = (f64::INFINITY, 0usize);
            for (j, &y) in pts.iter().enumerate() {
                let v = kernel.lancaster_ratio(pts[i], y, t_list[k])?.value;
                if v < best.0 {
                    best = (v, j);
                }
            }
            Ok((best.0, k, i, best.1))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = mins[0];
    for &m in &mins[1..] {
        if m.0 < best.0 {
            best = m;
        }
    }
    Ok(PositivityReport {
        min: best.0,
        x: pts[best.2],
        y: pts[best.3],
        t: t_list[best.1],
        grid,
        times: t_list.to_vec(),
        flagged: best.0 < -kernel.tolerance(),
    })
}

fn check_rule(kernel: &TransitionKernel) -> Result<GaussRule> {
    kernel.basis().gauss_rule(CHECK_NODES.min(kernel.basis().degree()))
}

/// Chapman-Kolmogorov residual at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CkResidual {
    pub s: f64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub composed: f64,
    pub direct: f64,
    pub residual: f64,
}

/// `|∫η(x|z,s)η(z|y,t)dz - η(x|y,s+t)|`, with the `z` integral done by the
/// Gauss rule of the basis.
pub fn chapman_kolmogorov_check(kernel: &TransitionKernel, s: f64, t: f64, x: f64, y: f64) -> Result<CkResidual> {
    if !(s > 0.0 && t > 0.0) {
        return Err(SmprError::InvalidParameter(format!("times must be positive, got s = {s}, t = {t}")));
    }
    let rule = check_rule(kernel)?;
    let fx = kernel.spec().density(x);
    let mut composed = 0.0;
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        composed += w * kernel.ratio(x, z, s)? * kernel.ratio(z, y, t)?;
    }
    composed *= fx;
    let direct = kernel.density(x, y, s + t)?;
    Ok(CkResidual { s, t, x, y, composed, direct, residual: (composed - direct).abs() })
}

/// Martingale residual for one polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleResidual {
    pub n: usize,
    pub y: f64,
    pub t: f64,
    pub integral: f64,
    pub expected: f64,
    pub residual: f64,
}

/// `|∫h_n(x)η(x|y,t)dx - e^{-α_n t}h_n(y)|`.
pub fn martingale_check(kernel: &TransitionKernel, n: usize, y: f64, t: f64) -> Result<MartingaleResidual> {
    let basis = kernel.basis();
    if n > basis.degree() {
        return Err(SmprError::OutOfRange { index: n, max: basis.degree() });
    }
    let rule = check_rule(kernel)?;
    let mut integral = 0.0;
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        integral += w * basis.eval(n, z)? * kernel.ratio(z, y, t)?;
    }
    let decay = kernel.alpha().rate(n).map_or(0.0, |a| (-a * t).exp());
    let expected = decay * basis.eval(n, y)?;
    Ok(MartingaleResidual { n, y, t, integral, expected, residual: (integral - expected).abs() })
}

/// `∫η(x|y,t)dx` over the support.
///
/// Closed forms on unbounded supports are integrated by double-exponential
/// quadrature. Everything else uses a Gauss rule of the basis: near the ends
/// of a bounded support the density cannot be resolved in `x` (arcsine mass
/// within one ulp of ±1 is about `1e-8`), and a Lancaster series cannot be
/// evaluated far out on an unbounded one.
pub fn row_integral(kernel: &TransitionKernel, y: f64, t: f64) -> Result<f64> {
    let s = kernel.spec().support();
    if kernel.closed_form().is_some() && kernel.uses_closed_form() && !s.is_bounded() {
        let failure = RefCell::new(None);
        let v = integrate(
            |x| {
                kernel.density(x, y, t).unwrap_or_else(|e| {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                })
            },
            s.lower,
            s.upper,
            1e-12,
        );
        return match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        };
    }
    let nodes = if s.is_bounded() { ROW_NODES } else { CHECK_NODES };
    let rule = kernel.basis().gauss_rule(nodes.min(kernel.basis().degree()))?;
    let mut total = 0.0;
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        total += w * kernel.ratio(z, y, t)?;
    }
    Ok(total)
}

/// Settings of [`verify_kernel`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    /// Points per axis of the duality and symmetry grids.
    pub grid: usize,
    pub times: Vec<f64>,
    /// `(s, t)` pairs for the semigroup check.
    pub ck_times: Vec<(f64, f64)>,
    /// Evaluation points as fractions of the half-width of the evaluation range.
    pub points: Vec<(f64, f64)>,
    pub martingale_max_n: usize,
    pub martingale_times: Vec<f64>,
    pub positivity_grid: usize,
    pub duality_tolerance: f64,
    pub ck_tolerance: f64,
    pub martingale_tolerance: f64,
    pub row_tolerance: f64,
    pub symmetry_tolerance: f64,
    pub positivity_tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            grid: 21,
            times: vec![0.1, 0.5, 2.0],
            ck_times: vec![(0.5, 0.5), (0.3, 0.7)],
            points: vec![(0.25, -0.1), (-0.6, 0.45)],
            martingale_max_n: 8,
            martingale_times: vec![0.2, 1.0],
            positivity_grid: 21,
            duality_tolerance: 1e-7,
            ck_tolerance: 1e-6,
            martingale_tolerance: 1e-7,
            row_tolerance: 1e-6,
            symmetry_tolerance: 1e-9,
            positivity_tolerance: 1e-8,
        }
    }
}

/// Largest closed-form/series deviation over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityCheck {
    pub max_deviation: f64,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub passed: bool,
}

/// Result of [`verify_kernel`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelVerification {
    pub closed_form: Option<ClosedForm>,
    pub duality: Option<DualityCheck>,
    pub symmetry_max: Option<f64>,
    pub row_integral_max_error: Option<f64>,
    pub chapman_kolmogorov: Vec<CkResidual>,
    pub martingale: Vec<MartingaleResidual>,
    pub positivity: Option<PositivityReport>,
    /// Checks that could not be computed, with the reason.
    pub errors: Vec<String>,
    pub ck_passed: bool,
    pub martingale_passed: bool,
    pub passed: bool,
}

fn scaled(range: Support, frac: f64) -> f64 {
    let mid = 0.5 * (range.lower + range.upper);
    mid + frac * 0.5 * (range.upper - range.lower)
}

/// The full check suite: duality (when a closed form exists), symmetry, row
/// integrals, Chapman-Kolmogorov, martingales for `n <= martingale_max_n`
/// and positivity.
pub fn verify_kernel(kernel: &TransitionKernel, opts: &VerifyOptions) -> KernelVerification {
    let range = kernel.spec().evaluation_range();
    let pts = grid_points(range, opts.grid);
    let mut errors = Vec::new();
    let closed_form = kernel.closed_form();

    let mut cells = Vec::with_capacity(opts.times.len() * pts.len() * pts.len());
    for &t in &opts.times {
        for &x in &pts {
            cells.extend(pts.iter().map(|&y| (x, y, t)));
        }
    }

    let duality = closed_form.and_then(|_| {
        let devs = cells
            .par_iter()
            .map(|&(x, y, t)| {
                let c = kernel.closed_ratio(x, y, t)?;
                let s = kernel.lancaster_ratio(x, y, t)?.value;
                Ok(((c - s).abs(), x, y, t))
            })
            .collect::<Result<Vec<_>>>();
        match devs {
            Ok(devs) => {
                let worst = devs.iter().copied().fold((0.0, 0.0, 0.0, 0.0), |a, d| if d.0 > a.0 { d } else { a });
                Some(DualityCheck {
                    max_deviation: worst.0,
                    x: worst.1,
                    y: worst.2,
                    t: worst.3,
                    passed: worst.0 < opts.duality_tolerance,
                })
            }
            Err(e) => {
                errors.push(format!("duality: {e}"));
                None
            }
        }
    });

    let symmetry = cells
        .par_iter()
        .map(|&(x, y, t)| Ok((kernel.ratio(x, y, t)? - kernel.ratio(y, x, t)?).abs()))
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max));
    let symmetry_max = match symmetry {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("symmetry: {e}"));
            None
        }
    };

    let mut row_err: Option<f64> = Some(0.0);
    'rows: for &t in &opts.times {
        for &(_, fy) in &opts.points {
            match row_integral(kernel, scaled(range, fy), t) {
                Ok(v) => row_err = row_err.map(|m| m.max((v - 1.0).abs())),
                Err(e) => {
                    errors.push(format!("row integral: {e}"));
                    row_err = None;
                    break 'rows;
                }
            }
        }
    }

    let mut ck = Vec::new();
    for &(s, t) in &opts.ck_times {
        for &(fx, fy) in &opts.points {
            match chapman_kolmogorov_check(kernel, s, t, scaled(range, fx), scaled(range, fy)) {
                Ok(r) => ck.push(r),
                Err(e) => errors.push(format!("Chapman-Kolmogorov: {e}")),
            }
        }
    }

    let mut martingale = Vec::new();
    let top = opts.martingale_max_n.min(kernel.basis().degree());
    for &t in &opts.martingale_times {
        for &(_, fy) in &opts.points {
            for n in 0..=top {
                match martingale_check(kernel, n, scaled(range, fy), t) {
                    Ok(r) => martingale.push(r),
                    Err(e) => errors.push(format!("martingale: {e}")),
                }
            }
        }
    }

    let positivity = match positivity_scan(kernel, opts.positivity_grid, &opts.times) {
        Ok(p) => Some(p),
        Err(e) => {
            errors.push(format!("positivity: {e}"));
            None
        }
    };

    let ck_passed = !ck.is_empty() && ck.iter().all(|r| r.residual < opts.ck_tolerance);
    let martingale_passed = !martingale.is_empty() && martingale.iter().all(|r| r.residual < opts.martingale_tolerance);
    let passed = errors.is_empty()
        && duality.is_none_or(|d| d.passed)
        && symmetry_max.is_some_and(|s| s < opts.symmetry_tolerance)
        && row_err.is_some_and(|e| e < opts.row_tolerance)
        && ck_passed
        && martingale_passed
        && positivity.as_ref().is_some_and(|p| p.min >= -opts.positivity_tolerance);

    KernelVerification {
        closed_form,
        duality,
        symmetry_max,
        row_integral_max_error: row_err,
        chapman_kolmogorov: ck,
        martingale,
        positivity,
        errors,
        ck_passed,
        martingale_passed,
        passed,
    }
}
