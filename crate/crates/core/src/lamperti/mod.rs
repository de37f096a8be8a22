//! Lamperti-type correspondence between MAPs and multi-self-similar Markov
//! processes.
//!
//! Forward: `X_t = phi(J_{tau_t}, xi_{tau_t})` with `tau` the inverse of
//! `F(s) = int_0^s exp(<alpha, xi_u>) du`, and `X = 0` from `F(killed_at)` on.
//! Inverse: `(J, xi) = phi^{-1}(X_{A_t})` with `A` the inverse of
//! `G(s) = int_0^s prod_i |X_u^(i)|^(-alpha_i) du`.
//!
//! Both integrals use the trapezoid rule on the path knots and are inverted by
//! linear interpolation between knots.

mod agglomerate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, SignState, StateSet};
use crate::sampler::{ChainJump, MapPath, Segment};

pub use agglomerate::{agglomerate_map_path, agglomerate_spec, project_path, Partition};

/// `phi(y, z) = (y_i exp(z_i))_i`.
pub fn phi(y: &SignState, z: &[f64]) -> Vec<f64> {
    z.iter().enumerate().map(|(i, zi)| y.sign(i) * zi.exp()).collect()
}

/// `phi^{-1}(x) = (sgn(x_i), ln|x_i|)_i`; every coordinate must be nonzero.
pub fn phi_inverse(x: &[f64]) -> Result<(SignState, Vec<f64>)> {
    let s = SignState::of(x)?;
    Ok((s, x.iter().map(|v| v.abs().ln()).collect()))
}

/// How an mssMp path ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lifetime {
    /// Absorbed at 0 at time `zeta`.
    Absorbed { zeta: f64 },
    /// Simulation window ended at `at` before absorption could be decided.
    Censored { at: f64 },
}

impl Lifetime {
    pub fn zeta(&self) -> Option<f64> {
        match self {
            Lifetime::Absorbed { zeta } => Some(*zeta),
            Lifetime::Censored { .. } => None,
        }
    }

    pub fn end(&self) -> f64 {
        match self {
            Lifetime::Absorbed { zeta } => *zeta,
            Lifetime::Censored { at } => *at,
        }
    }
}

/// An mssMp path on a time grid.
///
/// `labels[k]` is the chain state behind `values[k]` (so `sign(X)` is its sign
/// label) and `None` once the path sits at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MssmpPath {
    pub states: StateSet,
    pub alpha: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<Option<usize>>,
    pub lifetime: Lifetime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Partition>,
}

impl MssmpPath {
    pub fn dim(&self) -> usize {
        self.states.dim()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Checks the structural invariants and returns the first breach.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let zeta = self.lifetime.zeta();
        for k in 0..self.times.len() {
            if k > 0 && self.times[k] <= self.times[k - 1] {
                return Err(format!("times not increasing at index {k}"));
            }
            let t = self.times[k];
            let x = &self.values[k];
            let alive = zeta.is_none_or(|z| t < z);
            if alive {
                if x.iter().any(|v| *v == 0.0 || !v.is_finite()) {
                    return Err(format!("zero or non-finite coordinate before absorption at t = {t}"));
                }
                let Some(label) = self.labels[k] else {
                    return Err(format!("missing state label before absorption at t = {t}"));
                };
                let sign = SignState::of(x).map_err(|e| e.to_string())?;
                if &sign != self.states.get(label) {
                    return Err(format!("sign of X at t = {t} differs from its state label"));
                }
                if self.states.index_of(&sign).is_none() {
                    return Err(format!("sign of X at t = {t} is not in S"));
                }
            } else if x.iter().any(|v| *v != 0.0) || self.labels[k].is_some() {
                return Err(format!("X is not 0 after absorption at t = {t}"));
            }
        }
        Ok(())
    }
}

/// What the time-changed process shows at a given mssMp time.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Alive { state: usize, x: Vec<f64> },
    Absorbed,
    /// The requested time lies beyond the simulated window.
    Censored,
}

impl Observation {
    pub fn values(&self, d: usize) -> Option<Vec<f64>> {
        match self {
            Observation::Alive { x, .. } => Some(x.clone()),
            Observation::Absorbed => Some(vec![0.0; d]),
            Observation::Censored => None,
        }
    }
}

/// The additive functional `F` of a MAP path and its right-continuous inverse.
pub struct TimeChange<'a> {
    path: &'a MapPath,
    alpha: Vec<f64>,
    knot_s: Vec<f64>,
    knot_f: Vec<f64>,
    min_bar: f64,
    clock_scale: f64,
}

impl<'a> TimeChange<'a> {
    pub fn new(path: &'a MapPath, alpha: &[f64]) -> Result<Self> {
        if alpha.len() != path.dim() {
            return Err(Error::Config(format!(
                "alpha has {} entries, path dimension is {}",
                alpha.len(),
                path.dim()
            )));
        }
        let n = path.n_grid_points();
        if n < 2 || path.end_time() <= 0.0 {
            return Err(Error::Grid(format!("path grid has {n} points over [0, {}]", path.end_time())));
        }
        let mut knot_s = Vec::with_capacity(n + path.segments.len());
        let mut knot_f = Vec::with_capacity(n + path.segments.len());
        let mut min_bar = f64::INFINITY;
        let mut acc = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for knot in path.knots() {
            let bar = dot(alpha, knot.xi);
            min_bar = min_bar.min(bar);
            let w = bar.exp();
            if let Some((s0, w0)) = prev {
                acc += 0.5 * (w0 + w) * (knot.time - s0);
            }
            knot_s.push(knot.time);
            knot_f.push(acc);
            // no area across a jump: the next knot starts at the same time
            prev = Some((knot.time, w));
        }
        Ok(TimeChange {
            path,
            alpha: alpha.to_vec(),
            knot_s,
            knot_f,
            min_bar,
            clock_scale: 1.0,
        })
    }

    /// Test fixture: evaluates the path at `scale * tau_t` instead of `tau_t`.
    pub fn with_clock_scale(mut self, scale: f64) -> Self {
        self.clock_scale = scale;
        self
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `F` at the end of the simulated window.
    pub fn total(&self) -> f64 {
        *self.knot_f.last().expect("at least two knots")
    }

    pub fn min_bar(&self) -> f64 {
        self.min_bar
    }

    /// `F(s)` by interpolation between knots.
    pub fn functional(&self, s: f64) -> Option<f64> {
        if s < 0.0 || s > *self.knot_s.last()? {
            return None;
        }
        let k = self.knot_s.partition_point(|v| *v <= s).max(1) - 1;
        if k + 1 >= self.knot_s.len() {
            return Some(self.total());
        }
        let (s0, s1) = (self.knot_s[k], self.knot_s[k + 1]);
        let (f0, f1) = (self.knot_f[k], self.knot_f[k + 1]);
        Some(if s1 > s0 { f0 + (f1 - f0) * (s - s0) / (s1 - s0) } else { f0 })
    }

    /// `tau_t`, or `None` when `t >= F(end)`.
    pub fn tau(&self, t: f64) -> Option<f64> {
        if !(t >= 0.0) || t >= self.total() {
            return None;
        }
        let k = self.knot_f.partition_point(|f| *f <= t) - 1;
        let (f0, f1) = (self.knot_f[k], self.knot_f[k + 1]);
        let (s0, s1) = (self.knot_s[k], self.knot_s[k + 1]);
        Some(s0 + (t - f0) / (f1 - f0) * (s1 - s0))
    }

    pub fn observe(&self, t: f64) -> Observation {
        match self.tau(t) {
            None => {
                if self.clock_scale == 1.0 && self.path.killed_at.is_some() {
                    Observation::Absorbed
                } else {
                    Observation::Censored
                }
            }
            Some(tau) => {
                let s = tau * self.clock_scale;
                match self.path.state_at(s) {
                    Some((state, xi)) => Observation::Alive {
                        state,
                        x: phi(self.path.states.get(state), &xi),
                    },
                    None => Observation::Censored,
                }
            }
        }
    }
}

/// Time-changes a MAP path into an mssMp path.
///
/// Output grid: uniform with step `min(dt e^{min xibar}, dt)`, coarsened if
/// needed to at most ten output points per input grid point.
pub fn forward_transform(path: &MapPath, alpha: &[f64]) -> Result<MssmpPath> {
    let tc = TimeChange::new(path, alpha)?;
    let total = tc.total();
    let mut h = (path.dt * tc.min_bar().exp()).min(path.dt);
    let cap = 10 * path.n_grid_points();
    if total / h > cap as f64 {
        h = total / cap as f64;
    }
    let d = path.dim();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut j = 0u64;
    loop {
        let t = j as f64 * h;
        if t >= total {
            break;
        }
        if let Observation::Alive { state, x } = tc.observe(t) {
            times.push(t);
            values.push(x);
            labels.push(Some(state));
        }
        j += 1;
    }
    let lifetime = if path.killed_at.is_some() {
        times.push(total);
        values.push(vec![0.0; d]);
        labels.push(None);
        Lifetime::Absorbed { zeta: total }
    } else {
        Lifetime::Censored { at: total }
    };
    Ok(MssmpPath {
        states: path.states.clone(),
        alpha: alpha.to_vec(),
        times,
        values,
        labels,
        lifetime,
        partition: None,
    })
}

/// Evaluates the time-changed process at arbitrary mssMp times.
pub fn forward_transform_at(path: &MapPath, alpha: &[f64], times: &[f64]) -> Result<Vec<Observation>> {
    let tc = TimeChange::new(path, alpha)?;
    Ok(times.iter().map(|t| tc.observe(*t)).collect())
}

/// Recovers the MAP behind an mssMp path.
///
/// Each pre-absorption grid point `t_k` maps to MAP time `G(t_k)` with value
/// `phi^{-1}(X_{t_k})`; a change of state label starts a new segment.
pub fn inverse_transform(path: &MssmpPath, alpha: &[f64]) -> Result<MapPath> {
    let d = path.dim();
    if alpha.len() != d {
        return Err(Error::Config(format!("alpha has {} entries, path dimension is {d}", alpha.len())));
    }
    let zeta = path.lifetime.zeta();
    let alive: Vec<usize> = (0..path.len())
        .filter(|&k| zeta.is_none_or(|z| path.times[k] < z))
        .collect();
    if alive.is_empty() {
        return Err(Error::Grid("path has no point before absorption".into()));
    }

    let mut s_knots = Vec::with_capacity(alive.len());
    let mut xi_knots = Vec::with_capacity(alive.len());
    let mut state_knots = Vec::with_capacity(alive.len());
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &k in &alive {
        let x = &path.values[k];
        if let Some(i) = x.iter().position(|v| *v == 0.0) {
            return Err(Error::Domain(format!(
                "coordinate {} is 0 at t = {} before absorption",
                i + 1,
                path.times[k]
            )));
        }
        let (sign, xi) = phi_inverse(x)?;
        let state = match path.labels[k] {
            Some(s) => s,
            None => path
                .states
                .index_of(&sign)
                .ok_or_else(|| Error::Domain(format!("sign pattern {sign} at t = {} is not in S", path.times[k])))?,
        };
        let w = (-dot(alpha, &xi)).exp();
        if let Some((t0, w0)) = prev {
            acc += 0.5 * (w0 + w) * (path.times[k] - t0);
        }
        prev = Some((path.times[k], w));
        s_knots.push(acc);
        xi_knots.push(xi);
        state_knots.push(state);
    }

    let mut segments: Vec<Segment> = Vec::new();
    let mut chain_jumps = Vec::new();
    for i in 0..s_knots.len() {
        let new_segment = segments.last().is_none_or(|seg| seg.state != state_knots[i]);
        if new_segment {
            if let Some(seg) = segments.last_mut() {
                seg.end_time = s_knots[i];
                seg.end_xi = xi_knots[i - 1].clone();
                chain_jumps.push(ChainJump {
                    time: s_knots[i],
                    from: seg.state,
                    to: state_knots[i],
                    increment: xi_knots[i].iter().zip(&xi_knots[i - 1]).map(|(a, b)| a - b).collect(),
                });
            }
            segments.push(Segment {
                state: state_knots[i],
                times: vec![s_knots[i]],
                xi: vec![xi_knots[i].clone()],
                end_time: s_knots[i],
                end_xi: xi_knots[i].clone(),
            });
        } else {
            let seg = segments.last_mut().expect("segment");
            seg.times.push(s_knots[i]);
            seg.xi.push(xi_knots[i].clone());
        }
    }

    let last = segments.last_mut().expect("at least one segment");
    let last_k = *alive.last().expect("nonempty");
    let killed_at = match zeta {
        Some(z) => {
            // the integrand is frozen at its last value up to zeta
            let (_, w_last) = prev.expect("nonempty");
            let end = acc + w_last * (z - path.times[last_k]);
            last.end_time = end;
            last.end_xi = xi_knots.last().expect("nonempty").clone();
            Some(end)
        }
        None => {
            if last.times.len() > 1 {
                last.times.pop();
                last.end_xi = last.xi.pop().expect("nonempty");
            }
            last.end_time = acc;
            None
        }
    };
    let end = killed_at.unwrap_or(acc);
    let dt = if s_knots.len() > 1 { acc / (s_knots.len() - 1) as f64 } else { end.max(f64::MIN_POSITIVE) };
    Ok(MapPath {
        states: path.states.clone(),
        segments,
        chain_jumps,
        killed_at,
        horizon: end,
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LevyBlock, MapSpec};
    use crate::sampler::{sample_map_path, SimConfig};
    use nalgebra::DMatrix;

    fn single_state_drift(b: Vec<f64>, alpha: Vec<f64>) -> MapSpec {
        let d = b.len();
        MapSpec::independent(
            StateSet::new(vec![SignState::positive(d)]).unwrap(),
            DMatrix::zeros(1, 1),
            alpha,
            LevyBlock::drift_only(b),
        )
    }

    #[test]
    fn phi_examples() {
        let y = SignState::new(vec![1, -1]).unwrap();
        assert_eq!(phi(&y, &[0.0, 0.0]), vec![1.0, -1.0]);
        let y = SignState::new(vec![-1, 1]).unwrap();
        let e = std::f64::consts::E;
        assert_eq!(phi(&y, &[1.0, 2.0]), vec![-e, 2.0f64.exp()]);
        let (s, z) = phi_inverse(&[-e, 2.0f64.exp()]).unwrap();
        assert_eq!(s.signs(), &[-1, 1]);
        assert!((z[0] - 1.0).abs() < 1e-15 && (z[1] - 2.0).abs() < 1e-15);
        let (s, z) = phi_inverse(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s, SignState::positive(3));
        assert_eq!(z, vec![0.0; 3]);
        let x = [0.3, -7.2];
        let (s, z) = phi_inverse(&x).unwrap();
        let back = phi(&s, &z);
        assert!((back[0] - x[0]).abs() < 1e-15 && (back[1] - x[1]).abs() < 1e-14);
        assert!(matches!(phi_inverse(&[1.0, 0.0]), Err(Error::Domain(_))));
    }

    // X_t = x (1 + cbar t x^{-alpha})^{b/cbar} for a single-state drift MAP.
    fn drift_closed_form(x: &[f64], b: &[f64], alpha: &[f64], t: f64) -> Vec<f64> {
        let cbar = dot(alpha, b);
        let xa: f64 = x.iter().zip(alpha).map(|(xi, a)| xi.abs().powf(*a)).product();
        let base = 1.0 + cbar * t / xa;
        x.iter().zip(b).map(|(xi, bi)| xi * base.powf(bi / cbar)).collect()
    }

    #[test]
    fn forward_matches_drift_closed_form() {
        let b = vec![1.0, 1.0];
        let alpha = vec![1.0, 1.0];
        let spec = single_state_drift(b.clone(), alpha.clone());
        let x = [1.5, 0.8];
        let z: Vec<f64> = x.iter().map(|v: &f64| v.ln()).collect();
        let p = sample_map_path(&spec, &SimConfig::new(2.0, 1e-4, 0).start(0, z)).unwrap();
        let m = forward_transform(&p, &alpha).unwrap();
        assert!(m.check_invariants().is_ok());
        let mut worst = 0.0f64;
        for (t, v) in m.times.iter().zip(&m.values) {
            let exact = drift_closed_form(&x, &b, &alpha, *t);
            for i in 0..2 {
                worst = worst.max(((v[i] - exact[i]) / exact[i]).abs());
            }
        }
        assert!(worst <= 1e-6, "relative error {worst}");
    }

    #[test]
    fn round_trip_recovers_drift_path() {
        let b = vec![1.0, 1.0];
        let alpha = vec![1.0, 0.5];
        let spec = single_state_drift(b.clone(), alpha.clone());
        let x = [1.5, 0.8];
        let z: Vec<f64> = x.iter().map(|v: &f64| v.ln()).collect();
        let dt = 1e-4;
        let p = sample_map_path(&spec, &SimConfig::new(1.0, dt, 0).start(0, z.clone())).unwrap();
        let m = forward_transform(&p, &alpha).unwrap();
        let back = inverse_transform(&m, &alpha).unwrap();
        let abar = dot(&alpha, &b);
        let zbar = dot(&alpha, &z);
        let (mut worst, mut worst_bar) = (0.0f64, 0.0f64);
        for k in back.knots() {
            for i in 0..2 {
                worst = worst.max((k.xi[i] - (z[i] + b[i] * k.time)).abs());
            }
            worst_bar = worst_bar.max((dot(&alpha, k.xi) - (abar * k.time + zbar)).abs());
        }
        assert!(worst <= 5.0 * dt, "sup error {worst}");
        assert!(worst_bar <= 1e-4, "sup error {worst_bar}");
    }

    // Started at c x, the drift path at time c^alpha t is c times the path at t.
    #[test]
    fn pathwise_multi_scaling() {
        let b = vec![0.7, -0.2];
        let alpha = vec![1.0, 2.0];
        let spec = single_state_drift(b, alpha.clone());
        let x = [1.2, 0.9];
        let c = [1.7, 0.6];
        let ca: f64 = c.iter().zip(&alpha).map(|(ci, a): (&f64, &f64)| ci.powf(*a)).product();
        let z: Vec<f64> = x.iter().map(|v: &f64| v.ln()).collect();
        let zc: Vec<f64> = x.iter().zip(&c).map(|(v, ci)| (v * ci).ln()).collect();
        let p = sample_map_path(&spec, &SimConfig::new(2.0, 1e-3, 0).start(0, z)).unwrap();
        let pc = sample_map_path(&spec, &SimConfig::new(2.0, 1e-3, 0).start(0, zc)).unwrap();
        let ts: Vec<f64> = (0..50).map(|k| 0.02 * k as f64).collect();
        let tcs: Vec<f64> = ts.iter().map(|t| ca * t).collect();
        let a = forward_transform_at(&p, &alpha, &ts).unwrap();
        let bc = forward_transform_at(&pc, &alpha, &tcs).unwrap();
        for (o, oc) in a.iter().zip(&bc) {
            let (x0, x1) = (o.values(2).unwrap(), oc.values(2).unwrap());
            for i in 0..2 {
                assert!((c[i] * x0[i] - x1[i]).abs() <= 1e-9, "{} vs {}", c[i] * x0[i], x1[i]);
            }
        }
    }

    #[test]
    fn constant_map_gives_constant_mssmp() {
        let spec = single_state_drift(vec![0.0, 0.0], vec![1.0, 2.0]);
        let x = [2.0, 0.5];
        let z: Vec<f64> = x.iter().map(|v: &f64| v.ln()).collect();
        let p = sample_map_path(&spec, &SimConfig::new(1.0, 0.01, 0).start(0, z)).unwrap();
        let m = forward_transform(&p, &[1.0, 2.0]).unwrap();
        for v in &m.values {
            assert!((v[0] - 2.0).abs() < 1e-14 && (v[1] - 0.5).abs() < 1e-14);
        }
        let back = inverse_transform(&m, &[1.0, 2.0]).unwrap();
        for k in back.knots() {
            assert!((k.xi[0] - 2.0f64.ln()).abs() < 1e-14);
            assert!((k.xi[1] - 0.5f64.ln()).abs() < 1e-14);
            assert_eq!(k.state, 0);
        }
    }

    // cbar = -1 from x = (1,1): F(infinity) = int_0^inf e^{-s} ds = 1.
    #[test]
    fn negative_drift_functional_converges_to_one() {
        let spec = single_state_drift(vec![-0.5, -0.5], vec![1.0, 1.0]);
        let p = sample_map_path(&spec, &SimConfig::new(40.0, 1e-3, 0)).unwrap();
        let tc = TimeChange::new(&p, &[1.0, 1.0]).unwrap();
        assert!((tc.total() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn killed_path_is_absorbed() {
        let mut spec = single_state_drift(vec![0.1, 0.1], vec![1.0, 1.0]);
        spec.blocks[0].killing_rate = 1.0;
        let p = sample_map_path(&spec, &SimConfig::new(100.0, 0.01, 3)).unwrap();
        let k = p.killed_at.unwrap();
        let m = forward_transform(&p, &[1.0, 1.0]).unwrap();
        let tc = TimeChange::new(&p, &[1.0, 1.0]).unwrap();
        assert_eq!(m.lifetime, Lifetime::Absorbed { zeta: tc.total() });
        assert_eq!(tc.functional(k), Some(tc.total()));
        assert_eq!(m.values.last().unwrap(), &vec![0.0, 0.0]);
        assert!(m.check_invariants().is_ok());
        assert_eq!(tc.observe(tc.total() + 1.0), Observation::Absorbed);
        let back = inverse_transform(&m, &[1.0, 1.0]).unwrap();
        assert!((back.killed_at.unwrap() - k).abs() < 1e-3);
    }

    #[test]
    fn censored_when_unkilled() {
        let spec = single_state_drift(vec![0.1, 0.1], vec![1.0, 1.0]);
        let p = sample_map_path(&spec, &SimConfig::new(1.0, 0.01, 3)).unwrap();
        let m = forward_transform(&p, &[1.0, 1.0]).unwrap();
        assert!(matches!(m.lifetime, Lifetime::Censored { .. }));
        let tc = TimeChange::new(&p, &[1.0, 1.0]).unwrap();
        assert_eq!(tc.observe(tc.total()), Observation::Censored);
    }

    #[test]
    fn inverse_rejects_zero_coordinate() {
        let m = MssmpPath {
            states: StateSet::new(vec![SignState::positive(2)]).unwrap(),
            alpha: vec![1.0, 1.0],
            times: vec![0.0, 0.1],
            values: vec![vec![1.0, 1.0], vec![1.0, 0.0]],
            labels: vec![Some(0), Some(0)],
            lifetime: Lifetime::Censored { at: 0.1 },
            partition: None,
        };
        assert!(matches!(inverse_transform(&m, &[1.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn degenerate_grid_rejected() {
        let p = MapPath {
            states: StateSet::new(vec![SignState::positive(1)]).unwrap(),
            segments: vec![Segment {
                state: 0,
                times: vec![0.0],
                xi: vec![vec![0.0]],
                end_time: 0.0,
                end_xi: vec![0.0],
            }],
            chain_jumps: vec![],
            killed_at: None,
            horizon: 0.0,
            dt: 0.1,
        };
        assert!(matches!(forward_transform(&p, &[1.0]), Err(Error::Grid(_))));
    }

    #[test]
    fn tau_inverts_functional() {
        let spec = MapSpec::independent(
            StateSet::new(vec![SignState::positive(2), SignState::new(vec![-1, 1]).unwrap()]).unwrap(),
            DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            vec![1.0, 0.5],
            LevyBlock::drift_only(vec![0.2, -0.1]).with_covariance(vec![vec![0.4, 0.0], vec![0.0, 0.4]]),
        );
        let p = sample_map_path(&spec, &SimConfig::new(5.0, 0.01, 21)).unwrap();
        let tc = TimeChange::new(&p, &spec.alpha).unwrap();
        let mut prev = 0.0;
        for i in 0..500 {
            let t = tc.total() * i as f64 / 500.0;
            let tau = tc.tau(t).unwrap();
            assert!(tau >= prev);
            prev = tau;
            assert!((tc.functional(tau).unwrap() - t).abs() < 1e-9 * (1.0 + t));
        }
    }

    #[test]
    fn orthant_follows_chain() {
        let spec = MapSpec::independent(
            StateSet::new(vec![SignState::positive(2), SignState::new(vec![-1, 1]).unwrap()]).unwrap(),
            DMatrix::from_row_slice(2, 2, &[-2.0, 2.0, 2.0, -2.0]),
            vec![1.0, 1.0],
            LevyBlock::drift_only(vec![0.2, 0.1]).with_covariance(vec![vec![0.4, 0.0], vec![0.0, 0.4]]),
        );
        let p = sample_map_path(&spec, &SimConfig::new(5.0, 0.01, 2)).unwrap();
        let tc = TimeChange::new(&p, &spec.alpha).unwrap();
        let m = forward_transform(&p, &spec.alpha).unwrap();
        assert!(m.check_invariants().is_ok());
        for (t, label) in m.times.iter().zip(&m.labels) {
            let (state, _) = p.state_at(tc.tau(*t).unwrap()).unwrap();
            assert_eq!(Some(state), *label);
        }
    }
}
