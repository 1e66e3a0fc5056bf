//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so each criterion prints its verdict,
//! measured runtime and the key numbers behind it.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smpr::continuity::{
    alpha_admissibility, beta_summary, concavity_violation, continuity_coefficients, solve_alpha, AlphaSequence,
    RateFamily,
};
use smpr::kernels::{
    grid_points, jacobi_theta, theta_triple_product, verify_kernel, ThetaParams, TransitionKernel, VerifyOptions,
};
use smpr::marginals::{moment_summary, MarginalSpec};
use smpr::orthopoly::basis_from_moments;
use smpr::simulate::{
    default_lags, empirical_increment_moments, exact_increment_moments, scaling_slope, simulate_paths, SimConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

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

fn family(spec: MarginalSpec, f: RateFamily) -> Result<TransitionKernel, String> {
    e(TransitionKernel::new(&spec, e(AlphaSequence::from_family(f, 1.0))?))
}

fn closed_form_kernels() -> Result<Vec<(&'static str, TransitionKernel)>, String> {
    Ok(vec![
        ("Mehler", family(MarginalSpec::Gaussian, RateFamily::Linear)?),
        ("Hardy-Hille b=2", family(MarginalSpec::Gamma { shape: 2.0 }, RateFamily::Linear)?),
        ("Hardy-Hille b=3.5", family(MarginalSpec::Gamma { shape: 3.5 }, RateFamily::Linear)?),
        ("arcsine theta", family(MarginalSpec::Arcsine, RateFamily::Square)?),
        ("semicircle theta", family(MarginalSpec::Semicircle { radius: 1.0 }, RateFamily::Shifted)?),
    ])
}

fn criterion_1() -> Outcome {
    const TOL: f64 = 1e-12;
    let mut cases: Vec<(String, smpr::MomentSummary, f64)> = Vec::new();
    let mut add = |name: String, spec: MarginalSpec, c: f64| -> Result<(), String> {
        cases.push((name, e(moment_summary(&spec))?, c));
        Ok(())
    };
    add("gaussian".into(), MarginalSpec::Gaussian, 2.0)?;
    for b in [0.5, 1.0, 2.0, 10.0] {
        add(format!("gamma({b})"), MarginalSpec::Gamma { shape: b }, 2.0)?;
    }
    add("laplace".into(), MarginalSpec::Laplace, 8.0 / 5.0)?;
    add("arcsine".into(), MarginalSpec::Arcsine, 4.0)?;
    add("semicircle".into(), MarginalSpec::Semicircle { radius: 1.0 }, 8.0 / 3.0)?;
    for q in [-0.5, 0.0, 0.5, 1.0] {
        add(format!("qnormal({q})"), MarginalSpec::QNormal { q }, (8.0 + 4.0 * q) / (3.0 + 3.0 * q))?;
    }
    for (g, b) in [(0.5, 0.5), (1.5, 1.5)] {
        cases.push((format!("beta({g},{b})"), e(beta_summary(g, b))?, 2.0 + 2.0 / (g + b)));
    }
    let mut worst = 0.0f64;
    for (name, s, want) in &cases {
        let c = e(continuity_coefficients(s))?;
        let err = (c.shape_form - want).abs().max((c.moment_form - want).abs());
        worst = worst.max(err);
        ensure(err <= TOL, || format!("{name}: C = {} / {}, want {want}", c.shape_form, c.moment_form))?;
    }
    Ok(format!("{} laws, max |C - C*| = {worst:.1e}", cases.len()))
}

fn criterion_2() -> Outcome {
    const TOL: f64 = 1e-8;
    let r105 = 105f64.sqrt();
    let cases = [
        ("laplace k=3", MarginalSpec::Laplace, 3, vec![(35.0 - r105) / 28.0, (15.0 - r105) / 12.0]),
        ("semicircle k=4", MarginalSpec::Semicircle { radius: 1.0 }, 4, vec![8.0 / 3.0, 5.0, 8.0]),
        ("gaussian k=4", MarginalSpec::Gaussian, 4, vec![2.0, 3.0, 4.0]),
        ("gamma(2) k=4", MarginalSpec::Gamma { shape: 2.0 }, 4, vec![2.0, 3.0, 4.0]),
        ("gamma(0.5) k=4", MarginalSpec::Gamma { shape: 0.5 }, 4, vec![2.0, 3.0, 4.0]),
        ("arcsine k=4", MarginalSpec::Arcsine, 4, vec![4.0, 9.0, 16.0]),
    ];
    let mut worst = 0.0f64;
    for (name, spec, k, want) in cases {
        let c = e(basis_from_moments(&spec, 2 * k))?;
        let r = e(solve_alpha(&c, k))?;
        for (got, w) in r.ratios[1..].iter().zip(&want) {
            worst = worst.max((got - w).abs());
            ensure((got - w).abs() <= TOL, || format!("{name}: ratios {:?}, want {want:?}", &r.ratios[1..]))?;
        }
    }
    Ok(format!("6 systems, max deviation {worst:.1e}"))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn criterion_3() -> Outcome {
    // Gaussian: x^j = Σ_n j! / (2^m m! sqrt(n!)) h_n, j - n = 2m
    let c = e(basis_from_moments(&MarginalSpec::Gaussian, 12))?;
    let mut gauss = 0.0f64;
    for j in 0..=12 {
        for n in 0..=j {
            let want = if (j - n) % 2 == 0 {
                let m = (j - n) / 2;
                factorial(j) / (2f64.powi(m as i32) * factorial(m) * factorial(n).sqrt())
            } else {
                0.0
            };
            let err = (c.get(j, n) - want).abs() / want.abs().max(1.0);
            gauss = gauss.max(err);
            ensure(err <= 1e-9, || format!("gaussian c[{j}][{n}] = {}, want {want}", c.get(j, n)))?;
        }
    }
    // semicircle on [-1, 1]: 2^j x^j in the orthonormal U_n
    let table: [&[(usize, f64)]; 8] = [
        &[(1, 1.0)],
        &[(2, 1.0), (0, 1.0)],
        &[(3, 1.0), (1, 2.0)],
        &[(4, 1.0), (2, 3.0), (0, 2.0)],
        &[(5, 1.0), (3, 4.0), (1, 5.0)],
        &[(6, 1.0), (4, 5.0), (2, 9.0), (0, 5.0)],
        &[(7, 1.0), (5, 6.0), (3, 14.0), (1, 14.0)],
        &[(8, 1.0), (6, 7.0), (4, 20.0), (2, 28.0), (0, 14.0)],
    ];
    let c = e(basis_from_moments(&MarginalSpec::Semicircle { radius: 1.0 }, 8))?;
    let mut semi = 0.0f64;
    for (row, terms) in table.iter().enumerate() {
        let j = row + 1;
        for n in 0..=j {
            let coef = terms.iter().find(|t| t.0 == n).map_or(0.0, |t| t.1);
            let want = coef / 2f64.powi(j as i32);
            semi = semi.max((c.get(j, n) - want).abs());
            ensure((c.get(j, n) - want).abs() <= 1e-12, || format!("semicircle c[{j}][{n}] = {}, want {want}", c.get(j, n)))?;
        }
    }
    // low-order closed forms from the central moments
    let mut prop = 0.0f64;
    for spec in six() {
        let c = e(basis_from_moments(&spec, 3))?;
        let s = e(moment_summary(&spec))?;
        let (nu, m2, m3, m4) = (s.mean, s.m2(), s.m3(), s.m4());
        let want = [
            (1, 1, m2.sqrt()),
            (2, 1, (m3 + 2.0 * nu * m2) / m2.sqrt()),
            (3, 1, (m4 + 3.0 * nu * m3 + 3.0 * nu * nu * m2) / m2.sqrt()),
            (2, 2, ((m4 * m2 - m3 * m3 - m2.powi(3)) / m2).sqrt()),
        ];
        for (j, n, w) in want {
            let err = (c.get(j, n) - w).abs() / w.abs().max(1.0);
            prop = prop.max(err);
            ensure(err <= 1e-10, || format!("{spec}: c[{j}][{n}] = {}, want {w}", c.get(j, n)))?;
        }
    }
    Ok(format!("gaussian {gauss:.1e}, semicircle table {semi:.1e}, c11/c21/c31/c22 {prop:.1e}"))
}

fn criterion_4() -> Outcome {
    let times = [0.1, 0.5, 2.0];
    let mut parts = Vec::new();
    for (name, k) in closed_form_kernels()? {
        let spec = *k.spec();
        let pts = grid_points(spec.evaluation_range(), 21);
        let mut worst = 0.0f64;
        for &t in &times {
            for &y in &pts {
                for &x in &pts {
                    let f = spec.density(x);
                    let closed = e(k.closed_ratio(x, y, t))? * f;
                    let series = e(k.lancaster_ratio(x, y, t))?.value * f;
                    worst = worst.max((closed - series).abs());
                }
            }
        }
        ensure(worst < 1e-7, || format!("{name}: max deviation {worst:e}"))?;
        parts.push(format!("{name} {worst:.1e}"));
    }
    let mut theta = 0.0f64;
    for q in [0.01, 0.1, 0.3, 0.5, 0.7, 0.9] {
        for i in 0..=40 {
            let p = ThetaParams { q, alpha: std::f64::consts::PI * i as f64 / 40.0 };
            let (a, b) = (e(jacobi_theta(p))?, e(theta_triple_product(p))?);
            theta = theta.max((a - b).abs());
        }
    }
    ensure(theta < 1e-12, || format!("theta series vs product {theta:e}"))?;
    Ok(format!("{}; theta {theta:.1e}", parts.join(", ")))
}

fn criterion_5() -> Outcome {
    let opts = VerifyOptions::default();
    let mut parts = Vec::new();
    for (name, k) in closed_form_kernels()? {
        let v = verify_kernel(&k, &opts);
        ensure(v.errors.is_empty(), || format!("{name}: {:?}", v.errors))?;
        let ck = v.chapman_kolmogorov.iter().map(|r| r.residual).fold(0.0, f64::max);
        let mg = v.martingale.iter().map(|r| r.residual).fold(0.0, f64::max);
        ensure(ck < 1e-6 && mg < 1e-7 && v.ck_passed && v.martingale_passed, || {
            format!("{name}: CK {ck:e}, martingale {mg:e}")
        })?;
        ensure(v.martingale.iter().any(|r| r.n == 8), || format!("{name}: n = 8 not checked"))?;
        parts.push(format!("{name} CK {ck:.1e} mart {mg:.1e}"));
    }
    Ok(parts.join(", "))
}

/// `(2k)!/k! (β)^{(k)} (1 - e^{-t})^k`, with `(β)^{(k)} = 1` for the Gaussian.
fn increment_law(k: usize, rising: f64, t: f64) -> f64 {
    factorial(2 * k) / factorial(k) * rising * (-(-t).exp_m1()).powi(k as i32)
}

fn rising(b: f64, k: usize) -> f64 {
    (0..k).map(|i| b + i as f64).product()
}

fn criterion_6() -> Outcome {
    let linear = e(AlphaSequence::from_family(RateFamily::Linear, 1.0))?;
    let ks = [1, 2, 3, 4, 5];
    let lags = [0.001, 0.01, 0.1, 0.5, 1.0, 3.0];
    let mut exact = 0.0f64;
    let laws = [
        (MarginalSpec::Gaussian, None),
        (MarginalSpec::Gamma { shape: 0.5 }, Some(0.5)),
        (MarginalSpec::Gamma { shape: 2.0 }, Some(2.0)),
        (MarginalSpec::Gamma { shape: 10.0 }, Some(10.0)),
    ];
    for (spec, shape) in laws {
        let rep = e(exact_increment_moments(&spec, &linear, &ks, &lags))?;
        for &k in &ks {
            let s = rep.get(k).ok_or("missing k")?;
            for (i, &t) in lags.iter().enumerate() {
                let want = increment_law(k, shape.map_or(1.0, |b| rising(b, k)), t);
                let err = (s.moments[i] - want).abs() / want;
                exact = exact.max(err);
                ensure(err <= 1e-10, || format!("{spec} k={k} t={t}: {} vs {want}", s.moments[i]))?;
            }
        }
    }
    let mc_lags = [0.01, 0.02, 0.05, 0.1];
    let mut worst_z = 0.0f64;
    for (spec, shape, seed) in [(MarginalSpec::Gaussian, None, 61), (MarginalSpec::Gamma { shape: 2.0 }, Some(2.0), 62)] {
        let k = e(TransitionKernel::new(&spec, linear.clone()))?;
        let ens = e(simulate_paths(&SimConfig::new(k, 0.1, 0.01, 10_000, seed)))?;
        let rep = e(empirical_increment_moments(&ens, &[1, 2], &mc_lags))?;
        for kk in [1, 2] {
            let s = rep.get(kk).ok_or("missing k")?;
            for (i, &t) in mc_lags.iter().enumerate() {
                let want = increment_law(kk, shape.map_or(1.0, |b| rising(b, kk)), t);
                let z = (s.moments[i] - want).abs() / s.std_errors[i];
                worst_z = worst_z.max(z);
                ensure(z <= 4.0, || format!("{spec} MC k={kk} t={t}: {} vs {want}, z = {z:.2}", s.moments[i]))?;
            }
        }
    }
    Ok(format!("exact max rel err {exact:.1e}; MC 10^4 paths max |z| = {worst_z:.2}"))
}

fn criterion_7() -> Outcome {
    let lags = e(default_lags(0.01, 1.0, 8))?;
    let horizon = *lags.last().expect("lags");
    let models = [
        ("arcsine/n^2", MarginalSpec::Arcsine, RateFamily::Square, 71),
        ("semicircle/n(n+2)/3", MarginalSpec::Semicircle { radius: 1.0 }, RateFamily::Shifted, 72),
    ];
    let mut parts = Vec::new();
    for (name, spec, fam, seed) in models {
        let alpha = e(AlphaSequence::from_family(fam, 1.0))?;
        let exact = e(exact_increment_moments(&spec, &alpha, &[2, 3], &lags))?;
        let k = e(TransitionKernel::new(&spec, alpha))?;
        let ens = e(simulate_paths(&SimConfig::new(k, horizon, 0.01, 10_000, seed)))?;
        let mc = e(empirical_increment_moments(&ens, &[2, 3], &lags))?;
        for kk in [2usize, 3] {
            let se = e(scaling_slope(&exact, kk))?.slope;
            let sm = e(scaling_slope(&mc, kk))?.slope;
            let kf = kk as f64;
            ensure((se - kf).abs() <= 0.15, || format!("{name} k={kk}: exact slope {se}"))?;
            ensure((sm - kf).abs() <= 0.3, || format!("{name} k={kk}: Monte Carlo slope {sm}"))?;
            parts.push(format!("{name} k={kk} exact {se:.3} MC {sm:.3}"));
        }
    }
    Ok(parts.join(", "))
}

fn criterion_8() -> Outcome {
    let times = [0.1, 0.5, 1.0, 2.0];
    let linear = e(AlphaSequence::from_family(RateFamily::Linear, 1.0))?;
    let rep = e(alpha_admissibility(&linear, &MarginalSpec::Gaussian, &times))?;
    ensure(rep.concave && rep.rate_moment_passed && rep.product_moment_passed, || format!("α_n = n: {rep:?}"))?;
    let square = e(AlphaSequence::from_family(RateFamily::Square, 1.0))?;
    let rep = e(alpha_admissibility(&square, &MarginalSpec::Gaussian, &times))?;
    ensure(!rep.rate_moment_passed, || "α_n = n^2 passed the moment-sequence check".into())?;
    for chk in &rep.rate_moment {
        let want = (-4.0 * chk.t).exp() - (-2.0 * chk.t).exp();
        ensure(!chk.hankel.passed && chk.minor_2x2 < 0.0 && (chk.minor_2x2 - want).abs() < 1e-15, || {
            format!("α_n = n^2 at t = {}: minor {}", chk.t, chk.minor_2x2)
        })?;
    }
    // random sequences, half built concave
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut unif = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut concave_cases = 0;
    for case in 0..100 {
        let len = 3 + (unif() * 10.0) as usize;
        let mut rates = vec![0.0];
        if case % 2 == 0 {
            let mut step = 1.0 + 3.0 * unif();
            for _ in 1..len {
                rates.push(rates.last().unwrap() + step);
                step *= 0.3 + 0.7 * unif();
            }
        } else {
            for _ in 1..len {
                rates.push(rates.last().unwrap() + 5.0 * unif());
            }
        }
        let direct = (1..rates.len() - 1).find(|&m| 2.0 * rates[m] < rates[m - 1] + rates[m + 1]);
        ensure(concavity_violation(&rates) == direct, || format!("case {case}: {rates:?}"))?;
        concave_cases += direct.is_none() as usize;
    }
    Ok(format!("n passes, n^2 2x2 minor negative at {} times, 100 concavity cases ({concave_cases} concave)", times.len()))
}

fn criterion_9() -> Outcome {
    let dir = std::env::temp_dir().join(format!("smpr-acceptance-{}", std::process::id()));
    e(std::fs::create_dir_all(&dir))?;
    let model = concat!(env!("CARGO_MANIFEST_DIR"), "/models/arcsine.json");
    let mut outputs = Vec::new();
    for threads in ["1", "2", "8"] {
        for run in 0..2 {
            let out = dir.join(format!("ens-{threads}-{run}.csv"));
            let status = e(Command::new(env!("CARGO_BIN_EXE_smpr"))
                .args(["simulate", "--spec", model, "--paths", "40", "--dt", "0.05", "--horizon", "0.5", "--seed", "9"])
                .arg("--out")
                .arg(&out)
                .env("SMPR_THREADS", threads)
                .status())?;
            ensure(status.success(), || format!("simulate exited with {status}"))?;
            outputs.push(e(std::fs::read(&out))?);
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(outputs.iter().all(|o| *o == outputs[0]), || "CSV bytes differ across runs or thread counts".into())?;
    Ok(format!("6 runs, {} identical bytes each", outputs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("continuity coefficients", criterion_1, Duration::from_secs(1)),
        ("solve_alpha golden values", criterion_2, Duration::from_secs(5)),
        ("Cholesky vs closed-form coefficients", criterion_3, Duration::from_secs(1)),
        ("kernel duality", criterion_4, Duration::from_secs(30)),
        ("semigroup and martingale suite", criterion_5, Duration::from_secs(60)),
        ("increment-moment law", criterion_6, Duration::from_secs(300)),
        ("conjecture slopes", criterion_7, Duration::from_secs(300)),
        ("admissibility", criterion_8, Duration::from_secs(1)),
        ("determinism across threads", criterion_9, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let (verdict, detail) = match outcome {
            Ok(d) if took <= *budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("over the {budget:?} budget; {d}")),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("criterion {} [{verdict}] {name} ({:.2} s): {detail}", i + 1, took.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
