//! Markov additive process data model and its characteristic exponent.
//!
//! A [`MapSpec`] describes a MAP on `S x R^d`: a finite modulating chain with
//! intensity matrix `Q` over sign states, one finite-activity Lévy block per
//! state (drift, Brownian covariance, compound Poisson jumps, killing rate),
//! and a jump law for every chain transition. The exponent matrix
//!
//! ```text
//! A(u) = diag(psi_1(u), ..., psi_n(u)) + (q_ij G_ij(u))
//! ```
//!
//! gives `E_{i,0}[exp(<u, xi_t>); J_t = j] = exp(t A(u))_{ij}`.

mod json;
mod law;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use law::{Law, PreparedLaw};
pub(crate) use json::ser_matrix;
pub(crate) use law::{dot, from_matrix, is_psd, is_symmetric, to_matrix};

/// Tolerance on the row sums of `Q`.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A sign pattern `s in {-1, 1}^d`, labelling the open orthant `Q_s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignState(Vec<i8>);

impl SignState {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::Domain("sign state must have d >= 1 entries".into()));
        }
        if let Some(v) = signs.iter().find(|s| **s != 1 && **s != -1) {
            return Err(Error::Domain(format!("sign entry {v} is not -1 or +1")));
        }
        Ok(SignState(signs))
    }

    pub fn positive(d: usize) -> Self {
        SignState(vec![1; d])
    }

    /// Sign pattern of a point with no zero coordinate.
    pub fn of(x: &[f64]) -> Result<Self> {
        if let Some(i) = x.iter().position(|v| *v == 0.0 || v.is_nan()) {
            return Err(Error::Domain(format!("coordinate {} is {}", i + 1, x[i])));
        }
        Ok(SignState(x.iter().map(|v| if *v > 0.0 { 1 } else { -1 }).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn sign(&self, i: usize) -> f64 {
        f64::from(self.0[i])
    }

    pub(crate) fn is_well_formed(&self) -> bool {
        self.0.iter().all(|s| *s == 1 || *s == -1)
    }
}

impl fmt::Display for SignState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| if *s > 0 { "+" } else { "-" }.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Ordered list of chain states; position `k` is row/column `k` of every
/// matrix attached to the spec.
///
/// Labels may repeat: an agglomerated spec keeps the original chain and only
/// relabels its states by block sign products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateSet(Vec<SignState>);

impl StateSet {
    pub fn new(states: Vec<SignState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Domain("state set is empty".into()));
        }
        let d = states[0].dim();
        if states.iter().any(|s| s.dim() != d) {
            return Err(Error::Domain("state dimensions differ".into()));
        }
        Ok(StateSet(states))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.0.first().map_or(0, SignState::dim)
    }

    pub fn get(&self, k: usize) -> &SignState {
        &self.0[k]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SignState> {
        self.0.iter()
    }

    /// First chain state carrying label `s`.
    pub fn index_of(&self, s: &SignState) -> Option<usize> {
        self.0.iter().position(|t| t == s)
    }

    pub fn as_slice(&self) -> &[SignState] {
        &self.0
    }
}

/// Finite-activity Lévy exponent data for one chain state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyBlock {
    pub drift: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    #[serde(default)]
    pub jump_rate: f64,
    #[serde(default = "zero_law")]
    pub jump_law: Law,
    #[serde(default)]
    pub killing_rate: f64,
}

fn zero_law() -> Law {
    Law::Zero
}

impl LevyBlock {
    pub fn drift_only(drift: Vec<f64>) -> Self {
        let d = drift.len();
        LevyBlock {
            drift,
            covariance: vec![vec![0.0; d]; d],
            jump_rate: 0.0,
            jump_law: Law::Zero,
            killing_rate: 0.0,
        }
    }

    pub fn with_covariance(mut self, cov: Vec<Vec<f64>>) -> Self {
        self.covariance = cov;
        self
    }

    pub fn with_jumps(mut self, rate: f64, law: Law) -> Self {
        self.jump_rate = rate;
        self.jump_law = law;
        self
    }

    pub fn with_killing(mut self, rate: f64) -> Self {
        self.killing_rate = rate;
        self
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }
}

/// `psi(u) = <b,u> + u^T S u / 2 + r (m_D(u) - 1) - lambda`.
pub fn psi(block: &LevyBlock, u: &[f64]) -> Result<f64> {
    let mut quad = 0.0;
    for (i, row) in block.covariance.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            quad += u[i] * c * u[j];
        }
    }
    let jumps = if block.jump_rate > 0.0 {
        block.jump_rate * (block.jump_law.mgf(u)? - 1.0)
    } else {
        0.0
    };
    Ok(dot(&block.drift, u) + 0.5 * quad + jumps - block.killing_rate)
}

/// Full generative description of a MAP.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub states: StateSet,
    pub q: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub blocks: Vec<LevyBlock>,
    /// Jump law of `xi` at a chain transition `i -> j`; absent means zero.
    pub transition_jumps: BTreeMap<(usize, usize), Law>,
}

impl MapSpec {
    pub fn dimension(&self) -> usize {
        self.states.dim()
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn transition_law(&self, i: usize, j: usize) -> &Law {
        static ZERO: Law = Law::Zero;
        self.transition_jumps.get(&(i, j)).unwrap_or(&ZERO)
    }

    /// True when no state carries a killing rate.
    pub fn is_conservative(&self) -> bool {
        self.blocks.iter().all(|b| b.killing_rate == 0.0)
    }

    /// Max absolute drift coordinate over all blocks.
    pub fn max_abs_drift(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.drift.iter())
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// The independent-coupling MAP: one Lévy block shared by every state and
    /// no jumps at chain transitions.
    pub fn independent(states: StateSet, q: DMatrix<f64>, alpha: Vec<f64>, block: LevyBlock) -> Self {
        let n = states.len();
        MapSpec {
            states,
            q,
            alpha,
            blocks: vec![block; n],
            transition_jumps: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = validate_spec(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Spec(v))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One broken invariant: the offending field and the rule it breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Compact decimal rendering for messages: at most 10 decimals, no trailing zeros.
pub(crate) fn fmt_num(v: f64) -> String {
    let s = format!("{v:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Every broken invariant of `spec`; empty iff the spec is well formed.
pub fn validate_spec(spec: &MapSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = spec.states.len();
    let d = spec.dimension();
    if n == 0 {
        out.push(Violation::new("states", "states list is empty"));
        return out;
    }
    if d == 0 {
        out.push(Violation::new("dimension", "dimension must be at least 1"));
    }
    for (k, s) in spec.states.iter().enumerate() {
        if s.dim() != d {
            out.push(Violation::new("states", format!("state {k} has {} entries, expected {d}", s.dim())));
        }
        if !s.is_well_formed() {
            out.push(Violation::new("states", format!("state {k} has an entry other than -1/+1")));
        }
    }

    if spec.q.nrows() != n || spec.q.ncols() != n {
        out.push(Violation::new(
            "Q",
            format!("Q is {}x{}, expected {n}x{n}", spec.q.nrows(), spec.q.ncols()),
        ));
    } else {
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let v = spec.q[(i, j)];
                if !v.is_finite() {
                    out.push(Violation::new("Q", format!("Q entry ({i},{j}) is not finite")));
                }
                if i != j && v < 0.0 {
                    out.push(Violation::new("Q", format!("Q entry ({i},{j}) = {} is negative", fmt_num(v))));
                }
                sum += v;
            }
            if sum.abs() > ROW_SUM_TOL {
                out.push(Violation::new("Q", format!("Q row {i} sums to {} ≠ 0", fmt_num(sum))));
            }
        }
    }

    if spec.alpha.len() != d {
        out.push(Violation::new("alpha", format!("alpha has {} entries, expected {d}", spec.alpha.len())));
    }
    for (i, a) in spec.alpha.iter().enumerate() {
        if !(a.is_finite() && *a >= 0.0) {
            out.push(Violation::new("alpha", format!("alpha[{i}] = {} is not a finite value >= 0", fmt_num(*a))));
        }
    }

    if spec.blocks.len() != n {
        out.push(Violation::new("blocks", format!("expected {n} blocks, found {}", spec.blocks.len())));
    }
    for (k, b) in spec.blocks.iter().enumerate() {
        if b.drift.len() != d || b.drift.iter().any(|v| !v.is_finite()) {
            out.push(Violation::new("blocks", format!("block {k} drift must be {d} finite values")));
        }
        if b.covariance.len() != d || b.covariance.iter().any(|r| r.len() != d) {
            out.push(Violation::new("blocks", format!("block {k} covariance is not {d}x{d}")));
        } else if b.covariance.iter().flatten().any(|v| !v.is_finite()) {
            out.push(Violation::new("blocks", format!("block {k} covariance is not finite")));
        } else {
            let m = to_matrix(&b.covariance);
            if !is_symmetric(&m) {
                out.push(Violation::new("blocks", format!("block {k} covariance not symmetric")));
            } else if !is_psd(&m) {
                out.push(Violation::new("blocks", format!("block {k} covariance not PSD")));
            }
        }
        if !(b.jump_rate.is_finite() && b.jump_rate >= 0.0) {
            out.push(Violation::new("blocks", format!("block {k} jump_rate must be >= 0")));
        }
        if !(b.killing_rate.is_finite() && b.killing_rate >= 0.0) {
            out.push(Violation::new("blocks", format!("block {k} killing_rate must be >= 0")));
        }
        if let Err(e) = b.jump_law.check(d) {
            out.push(Violation::new("blocks", format!("block {k} jump_law {e}")));
        }
    }

    for (&(i, j), law) in &spec.transition_jumps {
        if i >= n || j >= n {
            out.push(Violation::new("transition_jumps", format!("transition {i}->{j} refers to a missing state")));
            continue;
        }
        if i == j && !law.is_zero() {
            out.push(Violation::new("transition_jumps", format!("transition {i}->{i} must be zero")));
        }
        if let Err(e) = law.check(d) {
            out.push(Violation::new("transition_jumps", format!("transition {i}->{j} law {e}")));
        }
    }
    out
}

/// `A(u)` evaluated at one point, with per-entry validity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentMatrix {
    pub u: Vec<f64>,
    #[serde(serialize_with = "json::ser_matrix")]
    pub entries: DMatrix<f64>,
    /// Row-major validity flags; an invalid entry holds NaN.
    pub valid: Vec<bool>,
}

impl ExponentMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_valid(&self) -> bool {
        self.valid.iter().all(|v| *v)
    }

    pub fn entry_valid(&self, i: usize, j: usize) -> bool {
        self.valid[i * self.n() + j]
    }
}

/// Evaluates `A(u)`. Entries outside the mgf domain are flagged, not fatal.
pub fn exponent_matrix(spec: &MapSpec, u: &[f64]) -> ExponentMatrix {
    let n = spec.n_states();
    let mut entries = DMatrix::zeros(n, n);
    let mut valid = vec![true; n * n];
    for i in 0..n {
        match psi(&spec.blocks[i], u) {
            Ok(p) => entries[(i, i)] = p + spec.q[(i, i)],
            Err(_) => {
                entries[(i, i)] = f64::NAN;
                valid[i * n + i] = false;
            }
        }
        for j in 0..n {
            if i == j {
                continue;
            }
            let q = spec.q[(i, j)];
            if q == 0.0 {
                continue;
            }
            match spec.transition_law(i, j).mgf(u) {
                Ok(g) => entries[(i, j)] = q * g,
                Err(_) => {
                    entries[(i, j)] = f64::NAN;
                    valid[i * n + j] = false;
                }
            }
        }
    }
    ExponentMatrix {
        u: u.to_vec(),
        entries,
        valid,
    }
}

/// `A(u v)`: with `v = e_k` this is the axis exponent `A_k(u)`, with `v = alpha`
/// the exponent of `<alpha, xi>`.
pub fn directional_exponent(spec: &MapSpec, v: &[f64], u: f64) -> ExponentMatrix {
    let w: Vec<f64> = v.iter().map(|x| x * u).collect();
    exponent_matrix(spec, &w)
}

/// Unit vector `e_k` in dimension `d`.
pub fn axis(d: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[k] = 1.0;
    e
}
