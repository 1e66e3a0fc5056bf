use super::*;
use crate::marginals::{moment_summary, raw_moments};
use crate::orthopoly::{basis_from_moments, basis_from_recurrence};

fn six() -> Vec<MarginalSpec> {
    vec![
        MarginalSpec::Gaussian,
        MarginalSpec::Gamma { shape: 2.0 },
        MarginalSpec::Laplace,
        MarginalSpec::Arcsine,
        MarginalSpec::Semicircle { radius: 1.0 },
        MarginalSpec::QNormal { q: 0.5 },
    ]
}

fn coeff(spec: &MarginalSpec, _k: usize) -> f64 {
    continuity_coefficient(&moment_summary(spec).unwrap()).unwrap()
}

#[test]
fn coefficient_examples() {
    assert!((coeff(&MarginalSpec::Gaussian, 0) - 2.0).abs() < 1e-12);
    assert!((coeff(&MarginalSpec::Laplace, 0) - 1.6).abs() < 1e-12);
    for beta in [0.5, 1.0, 2.0, 10.0] {
        assert!((coeff(&MarginalSpec::Gamma { shape: beta }, 0) - 2.0).abs() < 1e-12);
    }
    assert!((coeff(&MarginalSpec::Arcsine, 0) - 4.0).abs() < 1e-12);
    assert!((coeff(&MarginalSpec::Semicircle { radius: 2.0 }, 0) - 8.0 / 3.0).abs() < 1e-12);
    for q in [-0.5, 0.0, 0.5, 1.0] {
        let want = (8.0 + 4.0 * q) / (3.0 + 3.0 * q);
        assert!((coeff(&MarginalSpec::QNormal { q }, 0) - want).abs() < 1e-12, "q = {q}");
    }
}

#[test]
fn two_forms_agree() {
    for spec in six() {
        let c = continuity_coefficients(&moment_summary(&spec).unwrap()).unwrap();
        assert!((c.shape_form - c.moment_form).abs() < 1e-12);
    }
}

#[test]
fn beta_family() {
    for (g, b) in [(0.5, 0.5), (1.5, 1.5), (2.0, 5.0), (0.7, 3.1)] {
        let s = beta_summary(g, b).unwrap();
        // closed forms for the shape parameters
        let skew = 2.0 * (b - g) * (g + b + 1.0).sqrt() / ((g + b + 2.0) * (g * b).sqrt());
        let kurt = 6.0 * ((g - b).powi(2) * (g + b + 1.0) - (g + b + 2.0) * g * b)
            / (g * b * (g + b + 2.0) * (g + b + 3.0));
        assert!((s.skewness - skew).abs() < 1e-12);
        assert!((s.excess_kurtosis - kurt).abs() < 1e-12);
        let c = continuity_coefficient(&s).unwrap();
        assert!((c - (2.0 + 2.0 / (g + b))).abs() < 1e-12, "({g}, {b})");
    }
    assert!(beta_summary(0.0, 1.0).is_err());
}

#[test]
fn degenerate_two_point() {
    // symmetric two-point law: m2 = 1, m4 = 1
    let s = MomentSummary { mean: 0.0, central: vec![1.0, 0.0, 1.0, 0.0, 1.0], skewness: 0.0, excess_kurtosis: -2.0 };
    assert!(matches!(continuity_coefficient(&s), Err(SmprError::Degenerate(_))));
}

#[test]
fn second_moment_of_increment() {
    for spec in six() {
        let c = basis_from_moments(&spec, 2).unwrap();
        let e = increment_expansion(&c, 1).unwrap();
        let m2 = moment_summary(&spec).unwrap().m2();
        assert!((e.d[0] - 2.0 * m2).abs() < 1e-12 * m2);
    }
}

#[test]
fn fourth_moment_closed_form() {
    for spec in six() {
        let c = basis_from_moments(&spec, 4).unwrap();
        let e = increment_expansion(&c, 2).unwrap();
        let s = moment_summary(&spec).unwrap();
        let (m2, m3, m4) = (s.m2(), s.m3(), s.m4());
        let (a1, a2): (f64, f64) = (1.0, 1.7);
        for t in [0.0, 0.05, 0.3, 2.0] {
            let want = 2.0 * (m4 + 3.0 * m2 * m2) - 2.0 * (-a1 * t).exp() * (4.0 * m2 * m4 - 3.0 * m3 * m3) / m2
                + 6.0 * (-a2 * t).exp() * (m2 * m4 - m3 * m3 - m2.powi(3)) / m2;
            let got = e.eval_rates(&[a1, a2], t);
            assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()), "{spec} t={t}: {got} vs {want}");
        }
        assert_eq!(e.eval_rates(&[a1, a2], 0.0), 0.0);
    }
}

#[test]
fn gaussian_increments() {
    let c = basis_from_moments(&MarginalSpec::Gaussian, 10).unwrap();
    let alpha = AlphaSequence::from_family(RateFamily::Linear, 1.25).unwrap();
    for k in 1..=5 {
        let e = increment_expansion(&c, k).unwrap();
        let fk: f64 = ((k + 1)..=(2 * k)).map(|i| i as f64).product();
        for t in [0.01, 0.2, 1.0, 5.0] {
            let want = fk * (-(-1.25f64 * t).exp_m1()).powi(k as i32);
            let got = e.eval(&alpha, t).unwrap();
            assert!((got - want).abs() < 1e-10 * want, "k={k} t={t}: {got} vs {want}");
        }
        assert!((e.limit() - fk).abs() < 1e-9 * fk);
    }
    assert!(increment_expansion(&c, 6).is_err());
}

fn solve(spec: &MarginalSpec, k: usize) -> ContinuityReport {
    solve_alpha(&basis_from_moments(spec, 2 * k).unwrap(), k).unwrap()
}

fn assert_ratios(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-8, "{got:?} vs {want:?}");
    }
}

#[test]
fn solve_golden_values() {
    let r105 = 105f64.sqrt();
    let laplace = solve(&MarginalSpec::Laplace, 3);
    assert_ratios(&laplace.ratios, &[1.0, (35.0 - r105) / 28.0, (15.0 - r105) / 12.0]);
    assert!(laplace.roots.iter().any(|r| (r.ratios[1] - (35.0 + r105) / 28.0).abs() < 1e-8));
    assert_ratios(&solve(&MarginalSpec::Semicircle { radius: 1.0 }, 4).ratios, &[1.0, 8.0 / 3.0, 5.0, 8.0]);
    assert_ratios(&solve(&MarginalSpec::Arcsine, 4).ratios, &[1.0, 4.0, 9.0, 16.0]);
    for spec in [MarginalSpec::Gaussian, MarginalSpec::Gamma { shape: 2.0 }] {
        let r = solve(&spec, 4);
        assert_ratios(&r.ratios, &[1.0, 2.0, 3.0, 4.0]);
        assert!(r.taylor_residual < 1e-9);
        assert!(harness_detect(&r, &spec));
        assert!((r.holder_bound - 3.0 / 8.0).abs() < 1e-15);
    }
    assert!(!harness_detect(&solve(&MarginalSpec::Arcsine, 2), &MarginalSpec::Arcsine));
}

#[test]
fn k2_root_is_continuity_coefficient() {
    for spec in six() {
        let r = solve(&spec, 2);
        let c = continuity_coefficient(&moment_summary(&spec).unwrap()).unwrap();
        assert!((r.ratios[1] - c).abs() < 1e-10, "{spec}");
        assert!((r.continuity_coefficient - c).abs() < 1e-10);
    }
}

/// s-th derivative at 0 by forward differences, Richardson-extrapolated in h.
fn derivative_at_zero(e: &IncrementExpansion, rates: &[f64], s: usize) -> f64 {
    let fd = |h: f64| -> f64 {
        (0..=s)
            .map(|i| {
                let sign = if (s - i).is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * crate::marginals::binomial(s, i) * e.eval_rates(rates, i as f64 * h)
            })
            .sum::<f64>()
            / h.powi(s as i32)
    };
    let levels = 6;
    let mut table: Vec<Vec<f64>> = Vec::new();
    for i in 0..levels {
        let mut row = vec![fd(0.02 / 2f64.powi(i as i32))];
        for j in 1..=i {
            let p = 2f64.powi(j as i32);
            let v = (p * row[j - 1] - table[i - 1][j - 1]) / (p - 1.0);
            row.push(v);
        }
        table.push(row);
    }
    table[levels - 1][levels - 1]
}

#[test]
fn solved_expansions_are_flat_at_zero() {
    for (spec, k) in [(MarginalSpec::Laplace, 3), (MarginalSpec::Semicircle { radius: 1.0 }, 4), (MarginalSpec::Arcsine, 3)] {
        let r = solve(&spec, k);
        let e = &r.expansion;
        let scale: f64 = e.d.iter().map(|d| d.abs()).sum();
        for s in 1..k {
            let d = derivative_at_zero(e, &r.ratios, s);
            assert!(d.abs() < 1e-6 * scale, "{spec} s={s}: {d}");
        }
        // the first non-vanishing order is visible
        assert!(derivative_at_zero(e, &r.ratios, k).abs() > 1e-3 * scale);
        assert!(r.taylor_residual < 1e-9);
    }
}

#[test]
fn conditional_moments() {
    let spec = MarginalSpec::Gamma { shape: 2.0 };
    let c = basis_from_moments(&spec, 4).unwrap();
    let basis = basis_from_recurrence(&spec, 4).unwrap();
    let alpha = AlphaSequence::from_family(RateFamily::Linear, 1.0).unwrap();
    let m = raw_moments(&spec, 4).unwrap();
    for j in 0..=4 {
        let y = 1.7;
        assert!((conditional_moment(&c, &basis, &alpha, j, y, 0.0).unwrap() - y.powi(j as i32)).abs() < 1e-11);
        assert!((conditional_moment(&c, &basis, &alpha, j, y, 60.0).unwrap() - m[j]).abs() < 1e-11 * m[j]);
    }
    let g = MarginalSpec::Gaussian;
    let cg = basis_from_moments(&g, 2).unwrap();
    let bg = basis_from_recurrence(&g, 2).unwrap();
    let v = conditional_moment(&cg, &bg, &alpha, 1, 0.8, 0.4).unwrap();
    assert!((v - (-0.4f64).exp() * 0.8).abs() < 1e-15);
    assert!(conditional_moment(&cg, &bg, &alpha, 3, 0.8, 0.4).is_err());
}

