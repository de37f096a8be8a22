//! Closed-form mssMp generators used as oracles for the Lamperti pipeline.
//!
//! All three drive the chain with [`ChainWalker`] keyed by `(seed, replication)`,
//! so a MAP sampled with the same key sees the same chain realisation. The
//! chain starts at the all-positive state.
//!
//! With `x^alpha = prod |x_i|^alpha_i` and `abar = sum alpha_i`:
//!
//! ```text
//! chain scaling   X_t = x o J_{t / x^alpha}
//! drift scaling   X_t = x (1 + abar t x^-alpha)^(1/abar) o J_{ln(1 + abar t x^-alpha) / abar}
//! jumping spider  X_t = x o J_{C(t / x^alpha)} R_{t / x^alpha},  C(s) = int_0^s R_u^-2 du
//! ```
//!
//! where `R` is a Brownian motion from 1 killed at its first zero (abar = 2).

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lamperti::{Lifetime, MssmpPath};
use crate::model::{SignState, StateSet};
use crate::rng::{stream, StreamTag};
use crate::sampler::ChainWalker;

/// Parameters shared by the three generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleConfig {
    pub states: StateSet,
    #[serde(rename = "Q", with = "matrix_rows")]
    pub q: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub x: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub replication: u64,
}

/// The jumping spider takes the shared parameters; `alpha` must sum to 2.
pub type SpiderConfig = ExampleConfig;

mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        crate::model::ser_matrix(m, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("`Q` is not square"));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl ExampleConfig {
    pub fn new(states: StateSet, q: DMatrix<f64>, alpha: Vec<f64>, x: Vec<f64>, horizon: f64, dt: f64) -> Self {
        ExampleConfig {
            states,
            q,
            alpha,
            x,
            horizon,
            dt,
            seed: 0,
            replication: 0,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn replication(mut self, r: u64) -> Self {
        self.replication = r;
        self
    }

    pub fn start(mut self, x: Vec<f64>) -> Self {
        self.x = x;
        self
    }

    /// `prod |x_i|^alpha_i`.
    pub fn x_alpha(&self) -> f64 {
        self.x.iter().zip(&self.alpha).map(|(x, a)| x.abs().powf(*a)).product()
    }

    pub fn alpha_bar(&self) -> f64 {
        self.alpha.iter().sum()
    }

    fn check(&self) -> Result<usize> {
        let d = self.states.dim();
        let n = self.states.len();
        if self.alpha.len() != d || self.x.len() != d {
            return Err(Error::Config(format!(
                "alpha and x must have {d} entries, got {} and {}",
                self.alpha.len(),
                self.x.len()
            )));
        }
        if self.q.nrows() != n {
            return Err(Error::Config(format!("Q is {0}x{0}, S has {n} states", self.q.nrows())));
        }
        let rows_ok = (0..n).all(|i| {
            let s: f64 = (0..n).map(|j| self.q[(i, j)]).sum();
            s.abs() <= 1e-12 && (0..n).all(|j| i == j || self.q[(i, j)] >= 0.0)
        });
        if !rows_ok {
            return Err(Error::Config("Q is not an intensity matrix".into()));
        }
        if self.alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::Config("alpha must be finite and nonnegative".into()));
        }
        if !(self.horizon > 0.0 && self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::Config(format!(
                "need 0 < dt <= horizon, got dt = {} and horizon = {}",
                self.dt, self.horizon
            )));
        }
        let sign = SignState::of(&self.x).map_err(|_| Error::Config("x has a zero coordinate".into()))?;
        if self.states.index_of(&sign).is_none() {
            return Err(Error::Config(format!("x lies in orthant {sign}, which is not in S")));
        }
        self.states
            .index_of(&SignState::positive(d))
            .ok_or_else(|| Error::Config("S must contain the all-positive state".into()))
    }

    fn walker(&self, start: usize) -> ChainWalker {
        ChainWalker::new(&self.q, start, self.seed, self.replication)
    }

    fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let n = (self.horizon / self.dt).floor() as u64;
        (0..=n).map(move |k| k as f64 * self.dt)
    }
}

// X = radius * x o J as a labelled point; J's sign pattern times sign(x) must be in S.
fn point(cfg: &ExampleConfig, state: usize, radius: f64) -> Result<(Vec<f64>, usize)> {
    let j = cfg.states.get(state);
    let x: Vec<f64> = cfg.x.iter().enumerate().map(|(i, xi)| xi * j.sign(i) * radius).collect();
    let sign = SignState::of(&x)?;
    let label = cfg
        .states
        .index_of(&sign)
        .ok_or_else(|| Error::Config(format!("orthant {sign} reached by x o J is not in S")))?;
    Ok((x, label))
}

fn censored(cfg: &ExampleConfig, times: Vec<f64>, values: Vec<Vec<f64>>, labels: Vec<Option<usize>>) -> MssmpPath {
    MssmpPath {
        states: cfg.states.clone(),
        alpha: cfg.alpha.clone(),
        times,
        values,
        labels,
        lifetime: Lifetime::Censored { at: cfg.horizon },
        partition: None,
    }
}

/// `X_t = x o J_{t / x^alpha}` on the grid `k dt`.
pub fn example_chain_scaling(cfg: &ExampleConfig) -> Result<MssmpPath> {
    let start = cfg.check()?;
    let xa = cfg.x_alpha();
    let mut walker = cfg.walker(start);
    let (mut times, mut values, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for t in cfg.grid() {
        let state = walker.advance_to(t / xa);
        let (x, label) = point(cfg, state, 1.0)?;
        times.push(t);
        values.push(x);
        labels.push(Some(label));
    }
    Ok(censored(cfg, times, values, labels))
}

/// Radial growth `(1 + abar t x^-alpha)^(1/abar)` with the chain run on the
/// logarithmic clock.
pub fn example_drift_scaling(cfg: &ExampleConfig) -> Result<MssmpPath> {
    let start = cfg.check()?;
    let abar = cfg.alpha_bar();
    if !(abar > 0.0) {
        return Err(Error::Config("drift scaling requires sum(alpha) > 0".into()));
    }
    let xa = cfg.x_alpha();
    let mut walker = cfg.walker(start);
    let (mut times, mut values, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for t in cfg.grid() {
        let growth = (abar * t / xa).ln_1p();
        let state = walker.advance_to(growth / abar);
        let (x, label) = point(cfg, state, (growth / abar).exp())?;
        times.push(t);
        values.push(x);
        labels.push(Some(label));
    }
    Ok(censored(cfg, times, values, labels))
}

/// The jumping spider.
///
/// `R` is simulated on the grid `k dt / x^alpha`, so output times are `k dt`.
/// Absorption is detected by a sign change of the underlying Brownian path and
/// located by linear interpolation inside that step. The chain clock integrand
/// `R^-2` is capped at the inverse grid step.
pub fn example_jumping_spider(cfg: &SpiderConfig) -> Result<MssmpPath> {
    let start = cfg.check()?;
    let abar = cfg.alpha_bar();
    if (abar - 2.0).abs() > 1e-12 {
        return Err(Error::Config(format!("the jumping spider requires ᾱ=2 (sum of alpha), got {abar}")));
    }
    let xa = cfg.x_alpha();
    let h = cfg.dt / xa;
    let cap = 1.0 / h;
    let sqrt_h = h.sqrt();
    let mut noise = stream(cfg.seed, cfg.replication, StreamTag::Brownian);
    let mut walker = cfg.walker(start);

    let (mut times, mut values, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    let mut w = 1.0f64;
    let mut clock = 0.0;
    let mut integrand = 1.0f64;
    let n = (cfg.horizon / cfg.dt).floor() as u64;
    let (x0, l0) = point(cfg, walker.advance_to(0.0), 1.0)?;
    times.push(0.0);
    values.push(x0);
    labels.push(Some(l0));
    for k in 1..=n {
        let z: f64 = StandardNormal.sample(&mut noise);
        let w_next = w + sqrt_h * z;
        if w_next <= 0.0 {
            let s_zero = (k - 1) as f64 * h + h * w / (w - w_next);
            times.push(xa * s_zero);
            values.push(vec![0.0; cfg.x.len()]);
            labels.push(None);
            return Ok(MssmpPath {
                states: cfg.states.clone(),
                alpha: cfg.alpha.clone(),
                times,
                values,
                labels,
                lifetime: Lifetime::Absorbed { zeta: xa * s_zero },
                partition: None,
            });
        }
        let next_integrand = (w_next * w_next).recip().min(cap);
        clock += 0.5 * (integrand + next_integrand) * h;
        integrand = next_integrand;
        w = w_next;
        let (x, label) = point(cfg, walker.advance_to(clock), w)?;
        times.push(k as f64 * cfg.dt);
        values.push(x);
        labels.push(Some(label));
    }
    Ok(censored(cfg, times, values, labels))
}
