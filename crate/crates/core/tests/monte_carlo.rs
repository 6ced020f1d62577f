//! Statistical checks of the samplers and estimators.

use hom_metrology::estimate::{log_likelihood, mle_delta, mle_joint};
use hom_metrology::information::{fim_numeric, ParameterSet};
use hom_metrology::simulate::{sample_generative, sample_outcomes, CountsHistogram, RandomSeed};
use hom_metrology::{MeasurementConfig, Parameter, PhysicalParams};
use rand::Rng;
use rayon::prelude::*;

fn pp(d: f64, a: f64, s: f64, g: f64) -> PhysicalParams {
    PhysicalParams::new(d, a, s, g).unwrap()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn frequencies_converge_at_root_n() {
    let p = pp(0.5, 0.9, 1.0, 0.4);
    let config = MeasurementConfig::nrtr_hom(1.0).unwrap();
    let dist = config.outcome_distribution(&p).unwrap();
    let n = 1_000_000u64;
    let limit = 5.0 / (n as f64).sqrt();
    for (k, h) in [
        sample_outcomes(&p, &config, n, RandomSeed::new(3, 0)).unwrap(),
        sample_generative(&p, &config, n, RandomSeed::new(3, 1)).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        let worst = dist
            .iter()
            .filter(|(_, q)| *q >= 1e-3)
            .map(|(o, q)| (h.count(o) as f64 / n as f64 - q).abs())
            .fold(0.0, f64::max);
        assert!(worst < limit, "sampler {k}: deviation {worst:e} >= {limit:e}");
    }
}

#[test]
fn streams_are_reproducible_and_uncorrelated() {
    let a: Vec<f64> = {
        let mut r = RandomSeed::new(99, 0).rng();
        (0..1_000_000).map(|_| r.random::<f64>()).collect()
    };
    let again: Vec<f64> = {
        let mut r = RandomSeed::new(99, 0).rng();
        (0..1_000_000).map(|_| r.random::<f64>()).collect()
    };
    let b: Vec<f64> = {
        let mut r = RandomSeed::new(99, 0).stream(1).rng();
        (0..1_000_000).map(|_| r.random::<f64>()).collect()
    };
    assert_eq!(a, again);
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0);
    let r = cov / (va * vb).sqrt();
    assert!(r.abs() < 0.01, "cross-stream correlation {r}");

    let p = pp(0.5, 0.9, 1.0, 0.4);
    let config = MeasurementConfig::nrtr_hom(1.0).unwrap();
    let h1 = sample_generative(&p, &config, 10_000, RandomSeed::new(5, 2)).unwrap();
    let h2 = sample_generative(&p, &config, 10_000, RandomSeed::new(5, 2)).unwrap();
    let h3 = sample_generative(&p, &config, 10_000, RandomSeed::new(5, 3)).unwrap();
    assert_eq!(h1, h2);
    assert_ne!(h1.counts(), h3.counts());
}

#[test]
fn merging_is_order_independent() {
    let p = pp(0.3, 0.8, 1.0, 0.2);
    let config = MeasurementConfig::tr_hom(0.5).unwrap();
    let parts: Vec<CountsHistogram> = (0..3)
        .map(|s| sample_outcomes(&p, &config, 5_000, RandomSeed::new(1, s)).unwrap())
        .collect();
    let mut left = parts[0].clone();
    left.merge(&parts[1]).unwrap();
    left.merge(&parts[2]).unwrap();
    let mut right = parts[2].clone();
    let mut inner = parts[1].clone();
    inner.merge(&parts[0]).unwrap();
    right.merge(&inner).unwrap();
    assert_eq!(left, right);
    assert_eq!(left.n_trials(), 15_000);
}

#[test]
fn likelihood_prefers_truth() {
    let s = 1.0;
    let p = pp(0.5 / s, 0.9, s, 0.4);
    let shifted = p.with(Parameter::Delta, p.delta() + 0.2 / s).unwrap();
    let config = MeasurementConfig::nrtr_hom(1.0 / s).unwrap();
    let wins = (0..100u64)
        .into_par_iter()
        .filter(|&k| {
            let h = sample_outcomes(&p, &config, 100_000, RandomSeed::new(7, k)).unwrap();
            log_likelihood(&h, &p).unwrap() >= log_likelihood(&h, &shifted).unwrap()
        })
        .count();
    assert!(wins >= 99, "truth preferred in {wins} of 100");
}

#[test]
fn loss_only_estimate_is_efficient() {
    let p = pp(0.5, 0.9, 1.0, 0.4);
    let config = MeasurementConfig::nr_hom();
    let ps = ParameterSet::single(Parameter::Gamma);
    let n = 10_000u64;
    let est: Vec<f64> = (0..2000u64)
        .into_par_iter()
        .map(|k| {
            let h = sample_outcomes(&p, &config, n, RandomSeed::new(21, k)).unwrap();
            mle_joint(&h, &ps, &p).unwrap().estimate(Parameter::Gamma).unwrap()
        })
        .collect();
    let (m, v) = mean_var(&est);
    let scaled = v * n as f64;
    let target = 0.4 * 0.6 / 2.0;
    assert!((m - 0.4).abs() < 3.0 * (v / est.len() as f64).sqrt(), "mean {m}");
    assert!((scaled / target - 1.0).abs() < 0.10, "var*n = {scaled}, want {target}");
}

#[test]
fn joint_covariance_matches_inverse_information() {
    let s = 1.0;
    let p = pp(0.2 / s, 0.9, s, 0.4);
    let config = MeasurementConfig::nrtr_hom(1.0 / s).unwrap();
    let ps = ParameterSet::new(vec![Parameter::Delta, Parameter::Alpha]).unwrap();
    let n = 1_000_000u64;
    let seeds = 1200u64;
    let est: Vec<(f64, f64)> = (0..seeds)
        .into_par_iter()
        .map(|k| {
            let h = sample_outcomes(&p, &config, n, RandomSeed::new(31 + k / 400, k % 400)).unwrap();
            let r = mle_joint(&h, &ps, &p).unwrap();
            (r.estimate(Parameter::Delta).unwrap(), r.estimate(Parameter::Alpha).unwrap())
        })
        .collect();
    let ds: Vec<f64> = est.iter().map(|e| e.0).collect();
    let al: Vec<f64> = est.iter().map(|e| e.1).collect();
    let (md, vd) = mean_var(&ds);
    let (ma, va) = mean_var(&al);
    let cda = ds.iter().zip(&al).map(|(x, y)| (x - md) * (y - ma)).sum::<f64>() / (seeds as f64 - 1.0);
    let crb = fim_numeric(&config, &p, &ps).unwrap().matrix().clone().try_inverse().unwrap() / n as f64;
    let k = seeds as f64;
    assert!((md - p.delta()).abs() < 3.0 * (vd / k).sqrt(), "delta mean {md}");
    assert!((ma - p.alpha()).abs() < 3.0 * (va / k).sqrt(), "alpha mean {ma}");
    for (got, want, name) in [(vd, crb[(0, 0)], "var delta"), (va, crb[(1, 1)], "var alpha"), (cda, crb[(0, 1)], "cov")] {
        let f = got / want;
        assert!((0.7..=1.4).contains(&f), "{name}: factor {f} ({got:e} vs {want:e})");
    }
}

#[test]
fn rmse_falls_with_trials() {
    let p = pp(0.5, 0.9, 1.0, 0.4);
    for config in [
        MeasurementConfig::hom(),
        MeasurementConfig::nrtr_hom(1.0).unwrap(),
        MeasurementConfig::no_hom(1.0).unwrap(),
    ] {
        let rmse: Vec<f64> = [1_000u64, 10_000, 100_000]
            .iter()
            .map(|&n| {
                let sq: f64 = (0..100u64)
                    .into_par_iter()
                    .map(|k| {
                        let h = sample_outcomes(&p, &config, n, RandomSeed::new(41, k)).unwrap();
                        (mle_delta(&h, &p).unwrap().estimate(Parameter::Delta).unwrap() - p.delta()).powi(2)
                    })
                    .sum();
                (sq / 100.0).sqrt()
            })
            .collect();
        assert!(rmse[0] > rmse[1] && rmse[1] > rmse[2], "{}: {rmse:?}", config.label());
        // Roughly sqrt(10) per decade.
        let ratio = rmse[1] / rmse[2];
        assert!((2.0..5.0).contains(&ratio), "{}: decade ratio {ratio}", config.label());
    }
}
