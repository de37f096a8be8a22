//! Calibration and power of the statistical checks, plus example-path laws.

mod common;

use rand_distr::{Distribution, StandardNormal};

use lamperti_kit::reference::{example_chain_scaling, ExampleConfig};
use lamperti_kit::rng::{stream, StreamTag};
use lamperti_kit::verify::{ks_two_sample, verify_lifetime, verify_scaling, LifetimeRequest, ScalingRequest};

use common::{flip_q, independent_drift, two_orthants, with_kappa};

fn normals(seed: u64, rep: u64, n: usize, shift: f64) -> Vec<f64> {
    let mut g = stream(seed, rep, StreamTag::Levy);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut g);
            z + shift
        })
        .collect()
}

#[test]
fn ks_holds_its_level() {
    let rejections = (0..100)
        .filter(|&r| {
            let p = ks_two_sample(&normals(1, r, 2000, 0.0), &normals(2, r, 2000, 0.0)).unwrap().p_value;
            p < 0.01
        })
        .count();
    assert!(rejections <= 5, "{rejections} rejections out of 100 at level 0.01");
}

#[test]
fn ks_sees_a_unit_shift() {
    let p = ks_two_sample(&normals(3, 0, 2000, 0.0), &normals(4, 0, 2000, 1.0)).unwrap().p_value;
    assert!(p < 1e-6, "p = {p}");
}

#[test]
fn identical_arms_give_p_one() {
    let mut req = ScalingRequest::new(vec![1.0, 1.0], vec![1.0, 1.0], 200, 17);
    req.common_seed = true;
    let report = verify_scaling(&independent_drift(), &req).unwrap();
    assert_eq!(report.min_p_value, Some(1.0));
    assert_eq!(report.passed, Some(true));
}

#[test]
fn independent_drift_scales() {
    // noise-free, so |X| is an atom; the arms must still tie there
    let mut req = ScalingRequest::new(vec![1.0, 1.0], vec![2.0, 0.5], 2000, 23);
    req.times = vec![1.0];
    let report = verify_scaling(&independent_drift(), &req).unwrap();
    assert_eq!(report.passed, Some(true), "{:?}", report.checks);
}

#[test]
fn chain_scaling_slows_the_chain_by_x_alpha() {
    // x^alpha = 2^2 * 1^0 = 4, so each state is left at rate 1/4 in real time
    let horizon = 8.0;
    let n = 1000;
    let counts: Vec<f64> = (0..n)
        .map(|r| {
            let cfg = ExampleConfig {
                states: two_orthants(),
                q: flip_q(1.0, 1.0),
                alpha: vec![2.0, 0.0],
                x: vec![2.0, 1.0],
                horizon,
                dt: 0.01,
                seed: 5,
                replication: r,
            };
            let path = example_chain_scaling(&cfg).unwrap();
            path.labels.windows(2).filter(|w| w[0] != w[1]).count() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    let expected = horizon / 4.0;
    assert!((mean - expected).abs() < 4.0 * se, "mean {mean} vs {expected}, se {se}");
}

fn lifetime_run(kappa: f64) -> serde_json::Value {
    let spec = with_kappa(kappa, 0).spec();
    let req = LifetimeRequest {
        alpha: None,
        horizons: vec![8.0, 16.0, 32.0, 64.0],
        paths: 500,
        seed: 31,
        dt: 0.01,
        tol: None,
        threads: None,
    };
    let report = verify_lifetime(&spec, &req).unwrap();
    assert_eq!(report.passed, Some(true), "kappa {kappa}: {:?}", report.checks);
    report.details
}

fn profile(details: &serde_json::Value, key: &str) -> Vec<f64> {
    details["profile"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p[key].as_f64().unwrap())
        .collect()
}

#[test]
fn lifetime_dichotomy_profiles() {
    for kappa in [-0.3, 0.3] {
        let details = lifetime_run(kappa);
        let absorbed = profile(&details, "absorbed_fraction");
        assert!(absorbed.windows(2).all(|w| w[1] >= w[0]), "kappa {kappa}: {absorbed:?}");
        let last = *absorbed.last().unwrap();
        if kappa < 0.0 {
            assert!(last > 0.95, "{absorbed:?}");
        } else {
            assert!(last < 0.05, "{absorbed:?}");
        }
    }
}

#[test]
fn escaping_paths_leave_every_compact() {
    // positive drift along both axes: the limit statistic median falls to 0
    let details = lifetime_run(0.3);
    let stat = profile(&details, "median_limit_statistic");
    assert!(stat.windows(2).all(|w| w[1] <= w[0]), "{stat:?}");
    assert!(*stat.last().unwrap() < 1e-3, "{stat:?}");
}
