//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints its own PASS/FAIL line; the process exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use common::*;
use lamperti_kit::lamperti::{
    agglomerate_spec, forward_transform, forward_transform_at, inverse_transform, MssmpPath, Observation, Partition,
};
use lamperti_kit::model::{LevyBlock, MapSpec};
use lamperti_kit::reference::{example_drift_scaling, example_jumping_spider, ExampleConfig};
use lamperti_kit::rng::replicate;
use lamperti_kit::sampler::{empirical_exponent, sample_map_path, MapPath, SimConfig};
use lamperti_kit::spectral::{classify, ClassifyOptions};
use lamperti_kit::verify::{
    verify_agglomeration, verify_lifetime, verify_lln, verify_scaling, AgglomerationRequest, CheckKind,
    LifetimeRequest, LlnRequest, ScalingRequest,
};
use lamperti_kit::Error;

type Outcome = Result<String, String>;

/// Structural checks on every mssMp path the suite builds.
#[derive(Default)]
struct Sweep {
    paths: usize,
    absorbed: usize,
    failures: Vec<String>,
}

impl Sweep {
    fn check(&mut self, source: &str, path: &MssmpPath) {
        self.paths += 1;
        if path.lifetime.zeta().is_some() {
            self.absorbed += 1;
        }
        if let Err(e) = path.check_invariants() {
            self.failures.push(format!("{source}: {e}"));
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

// 1. Closed-form drift example against the Lamperti pipeline.
fn closed_form_match(sweep: &mut Sweep) -> Outcome {
    let alpha = vec![1.0, 1.0];
    let x = vec![1.5, 0.8];
    let dt = 1e-4;
    let q = uniform_q(4, 1.0);
    let unit = MapSpec::independent(four_orthants(), q.clone(), alpha.clone(), LevyBlock::drift_only(vec![1.0, 1.0]));
    let z: Vec<f64> = x.iter().map(|v: &f64| v.ln()).collect();
    let mut worst = 0.0f64;
    let mut switches = 0;
    for seed in 0..5 {
        let cfg = ExampleConfig::new(four_orthants(), q.clone(), alpha.clone(), x.clone(), 5.0, dt).seed(seed);
        let exact = example_drift_scaling(&cfg).map_err(err)?;
        sweep.check("drift example", &exact);
        let map = sample_map_path(&unit, &SimConfig::new(2.0, dt, seed).start(0, z.clone())).map_err(err)?;
        switches += map.chain_jumps.len();
        sweep.check("unit drift", &forward_transform(&map, &alpha).map_err(err)?);
        let got = forward_transform_at(&map, &alpha, &exact.times).map_err(err)?;
        for ((t, want), o) in exact.times.iter().zip(&exact.values).zip(&got) {
            let v = o.values(2).ok_or_else(|| format!("pipeline not alive at t = {t}"))?;
            for i in 0..2 {
                worst = worst.max(((v[i] - want[i]) / want[i]).abs());
            }
        }
    }
    ensure(worst <= 1e-6, || format!("sup relative error {worst:.3e} > 1e-6"))?;
    Ok(format!("sup relative error {worst:.2e} over 5 paths to T = 5 ({switches} chain switches)"))
}

// A segment's knots including its end point, for linear interpolation.
struct Knots {
    times: Vec<f64>,
    xi: Vec<Vec<f64>>,
}

impl Knots {
    fn of(path: &MapPath, k: usize) -> Self {
        let seg = &path.segments[k];
        let mut times = seg.times.clone();
        let mut xi = seg.xi.clone();
        if seg.end_time > *times.last().unwrap() {
            times.push(seg.end_time);
            xi.push(seg.end_xi.clone());
        }
        Knots { times, xi }
    }

    // clamped to the segment's time span
    fn at(&self, s: f64) -> Vec<f64> {
        if self.times.len() == 1 {
            return self.xi[0].clone();
        }
        let s = s.clamp(self.times[0], *self.times.last().unwrap());
        let j = self.times.partition_point(|t| *t <= s).clamp(1, self.times.len() - 1);
        let w = (s - self.times[j - 1]) / (self.times[j] - self.times[j - 1]);
        self.xi[j - 1].iter().zip(&self.xi[j]).map(|(a, b)| a + w * (b - a)).collect()
    }
}

// Sup over recovered knots of the coordinate error, segment by segment, and of
// the error in segment start times.
fn round_trip_error(orig: &MapPath, back: &MapPath) -> Result<f64, String> {
    ensure(orig.segments.len() == back.segments.len(), || {
        format!("{} segments recovered, {} simulated", back.segments.len(), orig.segments.len())
    })?;
    let mut worst = 0.0f64;
    for (k, seg) in back.segments.iter().enumerate() {
        ensure(seg.state == orig.segments[k].state, || format!("segment {k} has the wrong state"))?;
        worst = worst.max((seg.times[0] - orig.segments[k].times[0]).abs());
        let truth = Knots::of(orig, k);
        let knots = seg.times.iter().zip(&seg.xi).chain(std::iter::once((&seg.end_time, &seg.end_xi)));
        for (s, xi) in knots {
            for (a, b) in xi.iter().zip(&truth.at(*s)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}

// 2. inverse o forward recovers the MAP path.
fn round_trip(sweep: &mut Sweep) -> Outcome {
    let mut lines = Vec::new();
    for (name, spec) in drift_only_corpus() {
        let mut errs = [0.0f64; 2];
        for (slot, dt) in [1e-3, 1e-4].into_iter().enumerate() {
            for seed in 0..3 {
                let cfg = SimConfig::new(2.0, dt, seed).start(0, vec![0.4, -0.2]);
                let orig = sample_map_path(&spec, &cfg).map_err(err)?;
                let x = forward_transform(&orig, &spec.alpha).map_err(err)?;
                sweep.check(name, &x);
                let back = inverse_transform(&x, &spec.alpha).map_err(err)?;
                errs[slot] = errs[slot].max(round_trip_error(&orig, &back)?);
            }
            ensure(errs[slot] <= 5.0 * dt, || {
                format!("{name}: sup error {:.3e} > 5 dt at dt = {dt:e}", errs[slot])
            })?;
        }
        let order = if errs[1] > 1e-13 { format!("{:.2}", (errs[0] / errs[1]).log10()) } else { "exact".into() };
        lines.push(format!("{name} {:.1e}/{:.1e} (order {order})", errs[0], errs[1]));
    }
    Ok(format!("sup error at dt = 1e-3/1e-4: {}", lines.join(", ")))
}

// 3. E_i[exp(<u, xi_t>); J_t = j] = exp(t A(u))_ij.
fn exponent_semigroup(_: &mut Sweep) -> Outcome {
    let parts = TwoState::drift_only(1.0, 2.0, vec![1.0, 1.0], vec![0.5, -0.2], vec![-0.3, 0.4]);
    let spec = parts.spec();
    let u = [1.0, 1.0];
    let t = 0.5;
    // A(u) = diag(<b_i, u>) + Q, no transition jumps
    let psi: Vec<f64> = parts.drift.iter().map(|b| b.iter().zip(&u).map(|(x, y)| x * y).sum()).collect();
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(psi)) + flip_q(parts.up, parts.down);
    let oracle = expm(&(a * t));
    let est = empirical_exponent(&spec, &u, t, 100_000, 11, None).map_err(err)?;
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let z = (est.mean[(i, j)] - oracle[(i, j)]).abs() / est.std_err[(i, j)];
            ensure(z <= 4.0, || {
                format!("entry ({i},{j}): {} vs {} is {z:.2} SE off", est.mean[(i, j)], oracle[(i, j)])
            })?;
            worst = worst.max(z);
        }
    }
    Ok(format!("max deviation {worst:.2} SE over 4 entries, N = 100000"))
}

// 4. kappa and axis derivatives of the independent-coupling drift spec.
fn spectral_oracle(_: &mut Sweep) -> Outcome {
    let spec = independent_drift();
    // A(u) = <b, u> I + Q: the Perron root is <b, u>, linear in u
    let report = classify(&spec, &spec.alpha, &ClassifyOptions::default()).map_err(err)?;
    let want = [(report.kappa, 0.3), (report.axis_derivatives[0].value, 0.5), (report.axis_derivatives[1].value, -0.2)];
    for (got, w) in want {
        ensure((got - w).abs() <= 1e-6, || format!("{got} vs {w}"))?;
    }
    Ok(format!(
        "kappa {:.9}, chi'_1 {:.9}, chi'_2 {:.9}",
        report.kappa, report.axis_derivatives[0].value, report.axis_derivatives[1].value
    ))
}

// 5. xibar_T / T -> kappa.
fn lln(_: &mut Sweep) -> Outcome {
    let mut lines = Vec::new();
    for (k, target) in [-0.3, 0.0, 0.3].into_iter().enumerate() {
        let parts = with_kappa(target, k);
        let kappa = parts.kappa();
        ensure((kappa - target).abs() < 1e-12, || format!("corpus spec has kappa {kappa}, meant {target}"))?;
        let req = LlnRequest {
            alpha: None,
            horizon: 500.0,
            paths: 200,
            seed: 40 + k as u64,
            dt: 0.01,
            threads: None,
        };
        let report = verify_lln(&parts.spec(), &req).map_err(err)?;
        let mean = report.details["mean"].as_f64().unwrap();
        let se = report.details["std_err"].as_f64().unwrap();
        let z = (mean - kappa).abs() / se;
        ensure(z <= 4.0 && report.is_pass(), || format!("kappa {kappa}: mean {mean} is {z:.2} SE off"))?;
        lines.push(format!("kappa {kappa:+.1}: {z:.2} SE"));
    }
    Ok(lines.join(", "))
}

// 6. Finite or infinite lifetime, simulated against the spectral verdict.
fn lifetime(_: &mut Sweep) -> Outcome {
    let mut finite = 0;
    for (k, (spec, kappa)) in lifetime_corpus().into_iter().enumerate() {
        let verdict = classify(&spec, &spec.alpha, &ClassifyOptions::default()).map_err(err)?.lifetime;
        let verdict = serde_json::to_value(verdict).unwrap();
        let predicted_finite = kappa < 0.0;
        ensure(verdict == (if predicted_finite { "finite_as" } else { "infinite_as" }), || {
            format!("kappa {kappa}: classify says {verdict}")
        })?;
        let req = LifetimeRequest {
            alpha: None,
            horizons: vec![8.0, 16.0, 32.0, 64.0, 128.0],
            paths: 500,
            seed: 60 + k as u64,
            dt: 0.01,
            tol: None,
            threads: None,
        };
        let report = verify_lifetime(&spec, &req).map_err(err)?;
        ensure(report.is_pass() && report.details["predicted"] == verdict, || {
            format!("kappa {kappa}: simulation disagrees, median ratio {}", report.details["median_ratio"])
        })?;
        finite += predicted_finite as usize;
    }
    Ok(format!("6/6 agree with classify ({finite} finite, {} infinite), T up to 128, N = 500", 6 - finite))
}

// 7. Multi-scaling in law, plus the corrupted-clock fixture.
fn scaling(_: &mut Sweep) -> Outcome {
    let mut runs = 0;
    let mut min_p = 1.0f64;
    for (name, spec) in scaling_corpus() {
        for c in [vec![2.0, 0.5], vec![0.1, 10.0]] {
            let mut req = ScalingRequest::new(vec![1.0, 1.0], c.clone(), 2000, 70 + runs as u64);
            req.times = vec![0.5, 1.0];
            let report = verify_scaling(&spec, &req).map_err(err)?;
            let p = report.min_p_value.unwrap_or(1.0);
            ensure(report.is_pass(), || format!("{name}, c = {c:?}: fails, min p {p:.2e}"))?;
            min_p = min_p.min(p);
            runs += 1;
        }
    }
    let (_, spec) = scaling_corpus().remove(0);
    let mut req = ScalingRequest::new(vec![1.0, 1.0], vec![2.0, 0.5], 2000, 99);
    req.times = vec![1.0];
    req.clock_scale = 1.5;
    let report = verify_scaling(&spec, &req).map_err(err)?;
    let p = report.min_p_value.unwrap_or(1.0);
    ensure(!report.is_pass() && p < 1e-4, || format!("corrupted clock not detected, min p {p:.2e}"))?;
    Ok(format!("{runs} runs pass (smallest p {min_p:.3}); corrupted clock rejected with p {p:.1e}"))
}

// 8. Agglomeration commutes with the Lamperti transform.
fn agglomeration(sweep: &mut Sweep) -> Outcome {
    let mut spec = with_kappa(-0.1, 1).spec();
    let req = AgglomerationRequest {
        partition: vec![vec![0, 1]],
        horizon: 4.0,
        dt: 0.01,
        paths: 100,
        seed: 80,
        times: vec![0.5, 1.0],
        level: 0.01,
        tolerance: 1e-9,
        threads: None,
    };
    let report = verify_agglomeration(&spec, &req).map_err(err)?;
    let pathwise = report
        .checks
        .iter()
        .find(|c| c.kind == CheckKind::Pathwise)
        .ok_or("no pathwise check in report")?;
    ensure(report.error.is_none() && pathwise.statistic <= 1e-9 && report.is_pass(), || {
        format!("deviation {:.3e}, error {:?}", pathwise.statistic, report.error)
    })?;
    for r in 0..20 {
        let map = sample_map_path(&spec, &SimConfig::new(4.0, 0.01, 80).replication(r)).map_err(err)?;
        sweep.check("agglomeration", &forward_transform(&map, &spec.alpha).map_err(err)?);
    }
    let deviation = pathwise.statistic;
    spec.alpha = vec![1.0, 2.0];
    let partition = Partition::new(vec![vec![0, 1]], 2).map_err(err)?;
    ensure(matches!(agglomerate_spec(&spec, &partition), Err(Error::Partition(_))), || {
        "alpha = (1,2) was not rejected".into()
    })?;
    let report = verify_agglomeration(&spec, &req).map_err(err)?;
    ensure(report.error.as_deref().is_some_and(|e| e.starts_with("partition error")), || {
        format!("report error for alpha = (1,2): {:?}", report.error)
    })?;
    Ok(format!("max deviation {deviation:.1e} over 100 paths; alpha = (1,2) rejected"))
}

// 9. Jumping spider absorption by T = 1.
fn spider(sweep: &mut Sweep) -> Outcome {
    let n = 5000;
    let base = ExampleConfig::new(four_orthants(), uniform_q(4, 1.0), vec![1.0, 1.0], vec![1.0, 1.0], 1.0, 1e-4).seed(90);
    let paths = replicate(n, None, |r| example_jumping_spider(&base.clone().replication(r)));
    let mut hits = 0;
    for p in paths {
        let p = p.map_err(err)?;
        if p.lifetime.zeta().is_some_and(|z| z <= 1.0) {
            hits += 1;
        }
        sweep.check("spider", &p);
    }
    // reflection principle: P(BM from 1 hits 0 by time 1) = 2 P(N(0,1) > 1)
    let p = 2.0 * normal_upper_tail(1.0);
    ensure((p - 0.3173).abs() < 5e-5, || format!("oracle {p}"))?;
    let est = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let z = (est - p).abs() / se;
    ensure(z <= 4.0, || format!("absorbed fraction {est} vs {p:.4}: {z:.2} SE"))?;
    Ok(format!("absorbed fraction {est:.4} vs {p:.4} ({z:.2} SE)"))
}

// 10. Structural invariants and reproducibility.
fn invariants(sweep: &mut Sweep) -> Outcome {
    for (k, spec) in all_specs().into_iter().enumerate() {
        let d = spec.dimension();
        for r in 0..20 {
            let cfg = SimConfig::new(20.0, 0.01, 100 + k as u64).replication(r);
            let map = sample_map_path(&spec, &cfg).map_err(err)?;
            let x = forward_transform(&map, &spec.alpha).map_err(err)?;
            if let Some(zeta) = x.lifetime.zeta() {
                let after = forward_transform_at(&map, &spec.alpha, &[zeta, zeta + 1.0]).map_err(err)?;
                ensure(after.iter().all(|o| *o == Observation::Absorbed), || {
                    format!("corpus spec {k}: not at 0 after zeta")
                })?;
                ensure(after.iter().all(|o| o.values(d) == Some(vec![0.0; d])), || "nonzero after zeta".into())?;
            }
            sweep.check("corpus sweep", &x);
        }
    }
    ensure(sweep.failures.is_empty(), || sweep.failures[..sweep.failures.len().min(3)].join("; "))?;

    let (_, spec) = scaling_corpus().remove(1);
    let sample = |threads| {
        replicate(40, threads, |r| sample_map_path(&spec, &SimConfig::new(10.0, 0.01, 5).replication(r)).unwrap())
    };
    let serial = sample(Some(1));
    ensure(serial == sample(Some(4)) && serial == sample(None), || "paths depend on the thread count".into())?;
    let run = |threads| {
        let mut req = ScalingRequest::new(vec![1.0, 1.0], vec![2.0, 0.5], 300, 6);
        req.sim.threads = threads;
        verify_scaling(&spec, &req).unwrap()
    };
    let one = run(Some(1));
    ensure(one == run(Some(3)) && one == run(Some(8)), || "scaling report depends on the thread count".into())?;
    let lln = |threads| {
        let req = LlnRequest { alpha: None, horizon: 20.0, paths: 50, seed: 3, dt: 0.01, threads };
        verify_lln(&spec, &req).unwrap()
    };
    ensure(lln(Some(1)) == lln(Some(5)), || "lln report depends on the thread count".into())?;
    Ok(format!(
        "{} paths ({} absorbed) pass; threads 1/3/4/5/8 give bit-identical output",
        sweep.paths, sweep.absorbed
    ))
}

fn main() -> ExitCode {
    type Criterion = fn(&mut Sweep) -> Outcome;
    let criteria: [(&str, u64, Criterion); 10] = [
        ("closed-form Lamperti match", 5, closed_form_match),
        ("inverse/forward round trip", 10, round_trip),
        ("exponent semigroup", 30, exponent_semigroup),
        ("spectral oracle", 1, spectral_oracle),
        ("law of large numbers", 60, lln),
        ("lifetime dichotomy", 120, lifetime),
        ("multi-scaling in law", 180, scaling),
        ("agglomeration", 10, agglomeration),
        ("jumping spider absorption", 120, spider),
        ("structural invariants", 120, invariants),
    ];
    let mut sweep = Sweep::default();
    let mut failed = 0;
    for (k, (name, limit, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = f(&mut sweep);
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > Duration::from_secs(limit) => Err(format!("{msg}; over the {limit} s limit")),
            other => other,
        };
        let (tag, msg) = match &outcome {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        println!("[{tag}] {:>2}. {name}: {msg} ({:.2} s, limit {limit} s)", k + 1, elapsed.as_secs_f64());
        failed += outcome.is_err() as usize;
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
