use super::*;
use crate::continuity::{AlphaSequence, RateFamily};
use crate::marginals::MarginalSpec;

fn kernel(spec: MarginalSpec, family: RateFamily) -> TransitionKernel {
    TransitionKernel::new(&spec, AlphaSequence::from_family(family, 1.0).unwrap()).unwrap()
}

fn ou() -> TransitionKernel {
    kernel(MarginalSpec::Gaussian, RateFamily::Linear)
}

#[test]
fn median_by_symmetry() {
    let k = ou();
    let s = Sampler::new(&k, DEFAULT_GRID).unwrap();
    for t in [0.05, 1.0, 5.0] {
        assert!(s.sample(0.0, t, 0.5).unwrap().abs() < 1e-3);
    }
    assert!(transition_sample(&k, 0.0, 1.0, 0.0).is_err());
    assert!(Sampler::new(&k, 100).is_err());
}

#[test]
fn long_time_draws_follow_marginal() {
    let k = kernel(MarginalSpec::Gamma { shape: 2.0 }, RateFamily::Linear);
    let table = Sampler::new(&k, DEFAULT_GRID).unwrap().table(1.5, 30.0).unwrap();
    let mut xs: Vec<f64> = (0..10_000).map(|i| table.invert(uniform(7, 0, i)).unwrap()).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = k.spec().cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "KS distance {ks}");
}

#[test]
fn gaussian_pair_correlation() {
    let k = ou();
    let s = Sampler::new(&k, MIN_GRID).unwrap();
    let t = 0.5;
    let n = 100_000u64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let y = k.spec().quantile(uniform(11, i, 0));
        let x = s.sample(y, t, uniform(11, i, 1)).unwrap();
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    let r = sxy / (sxx * syy).sqrt();
    assert!((r - (-t).exp()).abs() < 0.01, "{r}");
}

#[test]
fn trivial_and_reproducible_ensembles() {
    let single = simulate_paths(&SimConfig::new(ou(), 0.0, 0.1, 1, 3)).unwrap();
    assert_eq!(single.states.len(), 1);
    assert_eq!(single.states[0].len(), 1);
    assert_eq!(single.states[0][0], MarginalSpec::Gaussian.quantile(uniform(3, 0, 0)));

    let mut cfg = SimConfig::new(ou(), 0.5, 0.1, 24, 99);
    cfg.threads = Some(1);
    let a = simulate_paths(&cfg).unwrap();
    cfg.threads = Some(3);
    let b = simulate_paths(&cfg).unwrap();
    assert_eq!(a, b);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    a.write_csv(&mut csv_a).unwrap();
    b.write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
    cfg.seed = 100;
    assert_ne!(simulate_paths(&cfg).unwrap().states, a.states);
    assert!(SimConfig::new(ou(), 0.25, 0.1, 2, 0).validate().is_err());
}

#[test]
fn ou_lag_one_autocorrelation_and_moments() {
    let cfg = SimConfig::new(ou(), 1.0, 0.1, 2000, 5);
    let ens = simulate_paths(&cfg).unwrap();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for row in &ens.states {
        for w in row.windows(2) {
            sxy += w[0] * w[1];
            sxx += 0.5 * (w[0] * w[0] + w[1] * w[1]);
        }
    }
    assert!((sxy / sxx - (-0.1f64).exp()).abs() < 0.01);

    let lags = [0.0, 0.1, 0.3, 0.5];
    let rep = empirical_increment_moments(&ens, &[1, 2], &lags).unwrap();
    let k1 = rep.get(1).unwrap();
    assert_eq!(k1.moments[0], 0.0);
    for i in 1..lags.len() {
        let want = 2.0 * (1.0 - (-lags[i]).exp());
        assert!((k1.moments[i] - want).abs() < 3.0 * k1.std_errors[i], "lag {}", lags[i]);
    }

    let st = stationarity_check(&ens, &MarginalSpec::Gaussian, 4).unwrap();
    assert!(st.flagged.is_empty(), "{:?}", st.flagged);
    assert!(reversibility_check(&ens, 0.2, 3).unwrap().max_abs_z < 4.0);
}

#[test]
fn gamma_fourth_increment_moment() {
    let k = kernel(MarginalSpec::Gamma { shape: 2.0 }, RateFamily::Linear);
    let ens = simulate_paths(&SimConfig::new(k, 1.0, 0.1, 1000, 8)).unwrap();
    let lags = [0.1, 0.4, 1.0];
    let rep = empirical_increment_moments(&ens, &[2], &lags).unwrap();
    let s = rep.get(2).unwrap();
    for i in 0..lags.len() {
        let want = 72.0 * (1.0 - (-lags[i]).exp()).powi(2);
        assert!((s.moments[i] - want).abs() < 3.0 * s.std_errors[i], "lag {}: {} vs {want}", lags[i], s.moments[i]);
    }
    let gamma1 = kernel(MarginalSpec::Gamma { shape: 1.0 }, RateFamily::Linear);
    let ens = simulate_paths(&SimConfig::new(gamma1, 0.2, 0.1, 2000, 9)).unwrap();
    let st = stationarity_check(&ens, &MarginalSpec::Gamma { shape: 1.0 }, 2).unwrap();
    assert!(st.slices.iter().all(|s| (s.moments[0] - 1.0).abs() < 0.1));
}

#[test]
fn exact_slopes() {
    let lags = default_lags(0.01, 1.0, 8).unwrap();
    let gauss = AlphaSequence::from_family(RateFamily::Linear, 1.0).unwrap();
    let rep = exact_increment_moments(&MarginalSpec::Gaussian, &gauss, &[2], &lags).unwrap();
    let s = scaling_slope(&rep, 2).unwrap().slope;
    assert!((1.85..=2.15).contains(&s), "{s}");
    let sq = AlphaSequence::from_family(RateFamily::Square, 1.0).unwrap();
    let rep = exact_increment_moments(&MarginalSpec::Arcsine, &sq, &[2, 3], &lags).unwrap();
    let s = scaling_slope(&rep, 3).unwrap().slope;
    assert!((2.7..=3.3).contains(&s), "{s}");
    let sh = AlphaSequence::from_family(RateFamily::Shifted, 1.0).unwrap();
    let rep = exact_increment_moments(&MarginalSpec::Semicircle { radius: 1.0 }, &sh, &[2], &lags).unwrap();
    let s = scaling_slope(&rep, 2).unwrap().slope;
    assert!((1.85..=2.15).contains(&s), "{s}");
    // linear rates do not solve the arcsine conditions
    let rep = exact_increment_moments(&MarginalSpec::Arcsine, &gauss, &[2], &lags).unwrap();
    let fit = scaling_slope(&rep, 2).unwrap();
    assert!(fit.ci_high < 1.7, "{fit:?}");
}

#[test]
fn lag_windows() {
    let lags = default_lags(0.01, 1.0, 8).unwrap();
    assert!(lags.len() >= 5);
    assert!(lags.last().unwrap() / lags[0] >= 10.0 - 1e-9);
    assert!(default_lags(0.05, 1.0, 8).is_err());
}

#[test]
fn holder_proxy() {
    let ens = simulate_paths(&SimConfig::new(ou(), 2.56, 0.01, 40, 21)).unwrap();
    let h = holder_estimate(&ens).unwrap();
    assert!((0.3..=0.6).contains(&h.estimate), "{h:?}");
    let flat = PathEnsemble {
        states: vec![vec![0.5; 9]; 3],
        streams: vec![0, 1, 2],
        seed: 0,
        dt: 0.1,
        steps: 8,
        grid: DEFAULT_GRID,
        max_clipped: 0.0,
    };
    let h = holder_estimate(&flat).unwrap();
    assert!(h.degenerate && h.estimate == 0.0);
    let short = PathEnsemble { states: vec![vec![0.0; 3]; 2], steps: 2, ..flat };
    assert!(holder_estimate(&short).is_err());
}

#[test]
fn pairwise_sum_matches() {
    let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
    assert_eq!(pairwise_sum(&v), 499_500.0);
}
