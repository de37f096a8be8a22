//! Exact-in-distribution MAP path simulation.
//!
//! The modulating chain is simulated event by event with exponential clocks
//! and never rounded to the grid; a knot is placed at every chain jump. Between
//! jumps `xi` moves by Lévy increments on a grid of step `dt`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal, StandardUniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;
use crate::model::{dot, to_matrix, MapSpec, PreparedLaw, StateSet};
use crate::rng::{replicate, stream, StreamTag};

/// Run parameters of one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub replication: u64,
    #[serde(default)]
    pub start_state: usize,
    /// Initial `xi_0`; empty means the origin.
    #[serde(default)]
    pub start_xi: Vec<f64>,
}

impl SimConfig {
    pub fn new(horizon: f64, dt: f64, seed: u64) -> Self {
        SimConfig {
            horizon,
            dt,
            seed,
            replication: 0,
            start_state: 0,
            start_xi: Vec::new(),
        }
    }

    pub fn replication(mut self, r: u64) -> Self {
        self.replication = r;
        self
    }

    pub fn start(mut self, state: usize, xi: Vec<f64>) -> Self {
        self.start_state = state;
        self.start_xi = xi;
        self
    }

    fn check(&self, spec: &MapSpec) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::Config(format!("dt must lie in (0, horizon], got {}", self.dt)));
        }
        if self.start_state >= spec.n_states() {
            return Err(Error::Config(format!("start state {} out of range", self.start_state)));
        }
        if !self.start_xi.is_empty() && self.start_xi.len() != spec.dimension() {
            return Err(Error::Config("start_xi has the wrong dimension".into()));
        }
        Ok(())
    }
}

/// A stretch of constant chain state.
///
/// `times[0]` is the segment start. `end_time`/`end_xi` hold the left limit at
/// the right boundary: the next chain jump, the kill time or the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub state: usize,
    pub times: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
    pub end_time: f64,
    pub end_xi: Vec<f64>,
}

impl Segment {
    pub fn start(&self) -> f64 {
        self.times[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainJump {
    pub time: f64,
    pub from: usize,
    pub to: usize,
    pub increment: Vec<f64>,
}

/// A sampled `(J, xi)` path on `[0, min(killed_at, horizon)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPath {
    pub states: StateSet,
    pub segments: Vec<Segment>,
    pub chain_jumps: Vec<ChainJump>,
    pub killed_at: Option<f64>,
    pub horizon: f64,
    pub dt: f64,
}

/// One evaluation point of a path: knots are segment grid points followed by
/// the segment's left-limit end point.
#[derive(Debug, Clone, Copy)]
pub struct Knot<'a> {
    pub time: f64,
    pub state: usize,
    pub xi: &'a [f64],
    /// True for a left-limit end point.
    pub is_end: bool,
}

impl MapPath {
    pub fn dim(&self) -> usize {
        self.states.dim()
    }

    /// End of the simulated window.
    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end_time)
    }

    pub fn knots(&self) -> impl Iterator<Item = Knot<'_>> {
        self.segments.iter().flat_map(|seg| {
            seg.times
                .iter()
                .zip(&seg.xi)
                .map(move |(t, x)| Knot {
                    time: *t,
                    state: seg.state,
                    xi: x,
                    is_end: false,
                })
                .chain(std::iter::once(Knot {
                    time: seg.end_time,
                    state: seg.state,
                    xi: &seg.end_xi,
                    is_end: true,
                }))
        })
    }

    pub fn n_grid_points(&self) -> usize {
        self.segments.iter().map(|s| s.times.len()).sum::<usize>() + 1
    }

    /// Right-continuous `(J_s, xi_s)`, linear in `xi` between grid points.
    pub fn state_at(&self, s: f64) -> Option<(usize, Vec<f64>)> {
        if s < 0.0 || s > self.end_time() {
            return None;
        }
        let k = self.segments.partition_point(|seg| seg.start() <= s);
        let seg = &self.segments[k.saturating_sub(1)];
        let i = seg.times.partition_point(|t| *t <= s) - 1;
        let (t0, x0) = (seg.times[i], &seg.xi[i]);
        let (t1, x1) = if i + 1 < seg.times.len() {
            (seg.times[i + 1], &seg.xi[i + 1])
        } else {
            (seg.end_time, &seg.end_xi)
        };
        let w = if t1 > t0 { (s - t0) / (t1 - t0) } else { 0.0 };
        let xi = x0.iter().zip(x1).map(|(a, b)| a + w * (b - a)).collect();
        Some((seg.state, xi))
    }

    /// Value of `xi` at the end of the window (left limit at a kill).
    pub fn final_xi(&self) -> &[f64] {
        &self.segments.last().expect("path has a segment").end_xi
    }
}

/// Sequential chain simulation on the `Chain` stream; shared by the MAP
/// sampler and the closed-form generators so both see one realisation.
pub struct ChainWalker {
    rng: ChaCha8Rng,
    rates: Vec<f64>,
    cumulative: Vec<Vec<(usize, f64)>>,
    state: usize,
    next_jump: f64,
}

impl ChainWalker {
    pub fn new(q: &DMatrix<f64>, start: usize, seed: u64, replication: u64) -> Self {
        let n = q.nrows();
        let rates: Vec<f64> = (0..n).map(|i| -q[(i, i)]).collect();
        let cumulative = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                (0..n)
                    .filter(|&j| j != i && q[(i, j)] > 0.0)
                    .map(|j| {
                        acc += q[(i, j)] / rates[i];
                        (j, acc)
                    })
                    .collect()
            })
            .collect();
        let mut w = ChainWalker {
            rng: stream(seed, replication, StreamTag::Chain),
            rates,
            cumulative,
            state: start,
            next_jump: 0.0,
        };
        w.next_jump = w.holding_time();
        w
    }

    fn holding_time(&mut self) -> f64 {
        let rate = self.rates[self.state];
        if rate > 0.0 {
            let e: f64 = Exp1.sample(&mut self.rng);
            e / rate
        } else {
            f64::INFINITY
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn next_jump(&self) -> f64 {
        self.next_jump
    }

    /// Performs the pending jump and returns `(time, from, to)`.
    pub fn jump(&mut self) -> (f64, usize, usize) {
        let t = self.next_jump;
        let from = self.state;
        let v: f64 = StandardUniform.sample(&mut self.rng);
        let table = &self.cumulative[from];
        let to = table
            .iter()
            .find(|(_, c)| v < *c)
            .or(table.last())
            .map(|(j, _)| *j)
            .expect("a state with a positive rate has a successor");
        self.state = to;
        self.next_jump = t + self.holding_time();
        (t, from, to)
    }

    /// State at time `t`; `t` must not decrease between calls.
    pub fn advance_to(&mut self, t: f64) -> usize {
        while self.next_jump <= t {
            self.jump();
        }
        self.state
    }
}

struct CompiledBlock {
    drift: Vec<f64>,
    root: Option<DMatrix<f64>>,
    jump_rate: f64,
    jump_law: PreparedLaw,
    killing_rate: f64,
}

/// Sampler form of a spec: matrix roots and prepared laws computed once.
pub struct CompiledSpec<'a> {
    spec: &'a MapSpec,
    blocks: Vec<CompiledBlock>,
    transitions: Vec<Vec<PreparedLaw>>,
}

impl<'a> CompiledSpec<'a> {
    pub fn new(spec: &'a MapSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dimension();
        let blocks = spec
            .blocks
            .iter()
            .map(|b| {
                let cov = to_matrix(&b.covariance);
                CompiledBlock {
                    drift: b.drift.clone(),
                    root: (cov.iter().any(|v| *v != 0.0)).then(|| psd_sqrt(&cov)),
                    jump_rate: b.jump_rate,
                    jump_law: b.jump_law.prepare(d),
                    killing_rate: b.killing_rate,
                }
            })
            .collect();
        let n = spec.n_states();
        let transitions = (0..n)
            .map(|i| (0..n).map(|j| spec.transition_law(i, j).prepare(d)).collect())
            .collect();
        Ok(CompiledSpec {
            spec,
            blocks,
            transitions,
        })
    }

    pub fn spec(&self) -> &MapSpec {
        self.spec
    }

    fn step<R: Rng>(&self, state: usize, h: f64, rng: &mut R, xi: &mut [f64]) {
        let b = &self.blocks[state];
        let d = xi.len();
        for (x, v) in xi.iter_mut().zip(&b.drift) {
            *x += v * h;
        }
        if let Some(root) = &b.root {
            let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
            let y = root * z;
            let s = h.sqrt();
            for (x, v) in xi.iter_mut().zip(y.iter()) {
                *x += s * v;
            }
        }
        if b.jump_rate > 0.0 && !b.jump_law.is_zero() {
            let count: f64 = Poisson::new(b.jump_rate * h).map_or(0.0, |p| p.sample(rng));
            for _ in 0..count as u64 {
                b.jump_law.add_sample(rng, xi);
            }
        }
    }

    /// Samples one path; see [`sample_map_path`].
    pub fn sample(&self, cfg: &SimConfig) -> Result<MapPath> {
        cfg.check(self.spec)?;
        let d = self.spec.dimension();
        let mut chain = ChainWalker::new(&self.spec.q, cfg.start_state, cfg.seed, cfg.replication);
        let mut levy = stream(cfg.seed, cfg.replication, StreamTag::Levy);
        let mut jumps = stream(cfg.seed, cfg.replication, StreamTag::TransitionJump);
        let mut kill = stream(cfg.seed, cfg.replication, StreamTag::Killing);

        let mut xi = if cfg.start_xi.is_empty() {
            vec![0.0; d]
        } else {
            cfg.start_xi.clone()
        };
        let mut t0 = 0.0;
        let mut segments = Vec::new();
        let mut chain_jumps = Vec::new();
        let mut killed_at = None;
        loop {
            let state = chain.state();
            let mut t1 = chain.next_jump().min(cfg.horizon);
            let lambda = self.blocks[state].killing_rate;
            if lambda > 0.0 {
                let e: f64 = Exp1.sample(&mut kill);
                let tk = t0 + e / lambda;
                if tk < t1 {
                    t1 = tk;
                    killed_at = Some(tk);
                }
            }
            let mut times = vec![t0];
            let mut values = vec![xi.clone()];
            let mut k = (t0 / cfg.dt).floor() as u64 + 1;
            let mut last = t0;
            loop {
                let g = k as f64 * cfg.dt;
                if g >= t1 {
                    break;
                }
                if g > last {
                    self.step(state, g - last, &mut levy, &mut xi);
                    times.push(g);
                    values.push(xi.clone());
                    last = g;
                }
                k += 1;
            }
            if t1 > last {
                self.step(state, t1 - last, &mut levy, &mut xi);
            }
            segments.push(Segment {
                state,
                times,
                xi: values,
                end_time: t1,
                end_xi: xi.clone(),
            });
            if killed_at.is_some() || t1 >= cfg.horizon {
                break;
            }
            let (t, from, to) = chain.jump();
            let mut inc = vec![0.0; d];
            self.transitions[from][to].add_sample(&mut jumps, &mut inc);
            for (x, dx) in xi.iter_mut().zip(&inc) {
                *x += dx;
            }
            chain_jumps.push(ChainJump {
                time: t,
                from,
                to,
                increment: inc,
            });
            t0 = t;
        }
        Ok(MapPath {
            states: self.spec.states.clone(),
            segments,
            chain_jumps,
            killed_at,
            horizon: cfg.horizon,
            dt: cfg.dt,
        })
    }
}

/// Samples a MAP path. Deterministic in `(spec, cfg)`.
pub fn sample_map_path(spec: &MapSpec, cfg: &SimConfig) -> Result<MapPath> {
    CompiledSpec::new(spec)?.sample(cfg)
}

/// Monte Carlo estimate of `E_{i,0}[exp(<u, xi_t>); J_t = j]` with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalExponent {
    pub mean: DMatrix<f64>,
    pub std_err: DMatrix<f64>,
    pub paths: usize,
}

pub fn empirical_exponent(
    spec: &MapSpec,
    u: &[f64],
    t: f64,
    paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<EmpiricalExponent> {
    let n = spec.n_states();
    if paths == 0 {
        return Err(Error::Config("need at least one path".into()));
    }
    if u.len() != spec.dimension() {
        return Err(Error::Config("u has the wrong dimension".into()));
    }
    if t == 0.0 {
        return Ok(EmpiricalExponent {
            mean: DMatrix::identity(n, n),
            std_err: DMatrix::zeros(n, n),
            paths,
        });
    }
    let compiled = CompiledSpec::new(spec)?;
    let mut mean = DMatrix::zeros(n, n);
    let mut std_err = DMatrix::zeros(n, n);
    for i in 0..n {
        let draws = replicate(paths, threads, |r| {
            // one step per segment: the law of xi at the horizon is exact
            let cfg = SimConfig::new(t, t, seed).replication(((i as u64) << 40) | r).start(i, Vec::new());
            compiled.sample(&cfg).map(|p| {
                if p.killed_at.is_some() {
                    None
                } else {
                    let last = p.segments.last().expect("segment");
                    Some((last.state, dot(u, &last.end_xi).exp()))
                }
            })
        });
        let mut s = vec![0.0; n];
        let mut s2 = vec![0.0; n];
        for d in draws {
            if let Some((j, v)) = d? {
                s[j] += v;
                s2[j] += v * v;
            }
        }
        let m = paths as f64;
        for j in 0..n {
            let mu = s[j] / m;
            mean[(i, j)] = mu;
            std_err[(i, j)] = ((s2[j] / m - mu * mu).max(0.0) / m).sqrt();
        }
    }
    Ok(EmpiricalExponent { mean, std_err, paths })
}
