//! Perron-Frobenius analysis of the exponent matrix and the asymptotic
//! classifier built on it.
//!
//! `chi(u)` is the leading (real, simple) eigenvalue of `A(u)` for an
//! irreducible chain. Along a direction `v` its derivative at 0 is the a.s.
//! drift of `<v, xi_t> / t`; `v = e_k` gives `chi'_k(0)` and `v = alpha` gives
//! `kappa_alpha`, which decide lifetime and limit of the mssMp.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{axis, directional_exponent, MapSpec};

/// Default tolerance for sign decisions.
pub const DEFAULT_TOL: f64 = 1e-7;

const MAX_POWER_STEPS: usize = 20_000;
const POLISH_STEPS: usize = 3;

/// Leading eigenpair of a Metzler matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Perron {
    pub value: f64,
    /// Right eigenvector, entries summing to 1.
    pub right: Vec<f64>,
    /// Left eigenvector with `left . right = 1`.
    pub left: Vec<f64>,
}

/// Whether the directed graph of nonzero off-diagonal entries is strongly
/// connected.
pub fn is_irreducible(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let reach_all = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let e = if forward { m[(i, j)] } else { m[(j, i)] };
                if i != j && e != 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n <= 1 || (reach_all(true) && reach_all(false))
}

fn check_metzler(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Domain(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has a non-finite entry".into()));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] < 0.0 {
                return Err(Error::Domain(format!("entry ({i},{j}) = {} is negative", m[(i, j)])));
            }
        }
    }
    Ok(())
}

/// Dominant eigenvector of `m` by shifted power iteration, then inverse
/// iteration at the estimate to reach full precision.
fn dominant_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let shift = 1.0 + (0..n).map(|i| m[(i, i)].abs()).fold(0.0f64, f64::max);
    let b = m + DMatrix::identity(n, n) * shift;
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..MAX_POWER_STEPS {
        let y = &b * &x;
        let y = &y / y.sum();
        let diff = (&y - &x).amax();
        x = y;
        if diff < 1e-14 {
            break;
        }
    }
    let scale = 1.0 + m.amax();
    for _ in 0..POLISH_STEPS {
        let lambda = (m * &x).sum() / x.sum();
        let mu = lambda + 1e-9 * scale;
        let shifted = m - DMatrix::identity(n, n) * mu;
        match shifted.lu().solve(&x) {
            Some(y) if y.iter().all(|v| v.is_finite()) && y.sum() != 0.0 => x = &y / y.sum(),
            _ => break,
        }
    }
    x
}

/// Perron-Frobenius eigenvalue and eigenvectors of an irreducible Metzler
/// matrix.
pub fn leading_eigenvalue(m: &DMatrix<f64>) -> Result<Perron> {
    check_metzler(m)?;
    if !is_irreducible(m) {
        return Err(Error::Reducible("off-diagonal support graph is not strongly connected".into()));
    }
    let r = dominant_vector(m);
    let l = dominant_vector(&m.transpose());
    let lr = l.dot(&r);
    let value = l.dot(&(m * &r)) / lr;
    Ok(Perron {
        value,
        right: r.iter().copied().collect(),
        left: (l / lr).iter().copied().collect(),
    })
}

/// Invariant law of an irreducible intensity matrix.
pub fn stationary_distribution(q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let p = leading_eigenvalue(q)?;
    let s: f64 = p.left.iter().sum();
    Ok(p.left.iter().map(|v| v / s).collect())
}

/// `chi(A(u v))`; `DomainError` outside the mgf domain.
pub fn chi(spec: &MapSpec, v: &[f64], u: f64) -> Result<f64> {
    let a = directional_exponent(spec, v, u);
    if !a.is_valid() {
        return Err(Error::Domain(format!("A(u v) is not defined at u = {u}")));
    }
    Ok(leading_eigenvalue(&a.entries)?.value)
}

/// Which side of 0 a derivative was taken on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    /// Average of both one-sided estimates.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub value: f64,
    pub side: Side,
}

/// Default step: `1e-3 / (1 + max |b|)`.
pub fn default_step(spec: &MapSpec) -> f64 {
    1e-3 / (1.0 + spec.max_abs_drift())
}

fn valid_side(spec: &MapSpec, v: &[f64], h: f64) -> bool {
    (1..=3).all(|k| directional_exponent(spec, v, k as f64 * h).is_valid())
}

// Third-order one-sided stencil on 0, h, 2h, 3h (h may be negative).
fn one_sided(spec: &MapSpec, v: &[f64], h: f64, f0: f64) -> Result<f64> {
    let f1 = chi(spec, v, h)?;
    let f2 = chi(spec, v, 2.0 * h)?;
    let f3 = chi(spec, v, 3.0 * h)?;
    Ok((-11.0 * f0 + 18.0 * f1 - 9.0 * f2 + 2.0 * f3) / (6.0 * h))
}

/// Derivative at 0 of `u -> chi(A(u v))`, one-sided on whichever side the
/// exponent is defined, averaged when both are.
pub fn chi_derivative(spec: &MapSpec, v: &[f64], h: f64) -> Result<Derivative> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    let right = valid_side(spec, v, h);
    let left = valid_side(spec, v, -h);
    if !right && !left {
        return Err(Error::Domain(format!(
            "A(u v) is undefined on both sides of 0 at step {h}"
        )));
    }
    let f0 = chi(spec, v, 0.0)?;
    let (value, side) = match (left, right) {
        (true, true) => (0.5 * (one_sided(spec, v, h, f0)? + one_sided(spec, v, -h, f0)?), Side::Both),
        (false, true) => (one_sided(spec, v, h, f0)?, Side::Right),
        _ => (one_sided(spec, v, -h, f0)?, Side::Left),
    };
    Ok(Derivative { value, side })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifetimeVerdict {
    FiniteAs,
    InfiniteAs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVerdict {
    ZeroAs,
    Undetermined,
}

/// Which hypothesis gives the limit at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitCase {
    /// Some axis derivative is nonzero.
    AxisDrift,
    /// All axis derivatives vanish and `kappa < 0`.
    NegativeKappa,
    /// All axis derivatives vanish and `kappa > 0`.
    PositiveKappa,
}

/// The hypotheses the classifier relies on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    pub dimension_at_least_two: bool,
    /// No state has a killing rate.
    pub no_killing: bool,
    pub irreducible: bool,
    /// Per axis: `A(u e_k)` is defined on some side of 0 at the step used.
    pub axis_mgf: Vec<bool>,
}

impl Conditions {
    pub fn check(spec: &MapSpec, h: f64) -> Self {
        let d = spec.dimension();
        Conditions {
            dimension_at_least_two: d >= 2,
            no_killing: spec.is_conservative(),
            irreducible: is_irreducible(&spec.q),
            axis_mgf: (0..d)
                .map(|k| {
                    let e = axis(d, k);
                    valid_side(spec, &e, h) || valid_side(spec, &e, -h)
                })
                .collect(),
        }
    }

    pub fn all_hold(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.dimension_at_least_two {
            out.push("classification requires dimension >= 2".to_string());
        }
        if !self.no_killing {
            out.push("(a) some state has a positive killing rate".to_string());
        }
        if !self.irreducible {
            out.push("(b) Q is not irreducible".to_string());
        }
        for (k, ok) in self.axis_mgf.iter().enumerate() {
            if !ok {
                out.push(format!("(c) A(u e_{k}) is undefined near 0 on both sides"));
            }
        }
        out
    }
}

/// Spectrum of `A(u alpha)` at one probe point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub u: f64,
    pub chi: f64,
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisDerivative {
    pub axis: usize,
    pub value: f64,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub alpha: Vec<f64>,
    pub kappa: f64,
    pub kappa_side: Side,
    /// How `kappa` is computed from the exponent.
    pub kappa_reading: String,
    pub axis_derivatives: Vec<AxisDerivative>,
    pub lifetime: LifetimeVerdict,
    pub limit: LimitVerdict,
    pub limit_case: Option<LimitCase>,
    pub conditions: Conditions,
    pub tol: f64,
    pub step: f64,
    pub warnings: Vec<String>,
    pub probes: Vec<Probe>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub tol: f64,
    /// Finite-difference step; `None` picks [`default_step`].
    pub step: Option<f64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            tol: DEFAULT_TOL,
            step: None,
        }
    }
}

fn probe(spec: &MapSpec, alpha: &[f64], u: f64) -> Option<Probe> {
    let a = directional_exponent(spec, alpha, u);
    if !a.is_valid() {
        return None;
    }
    let chi = leading_eigenvalue(&a.entries).ok()?.value;
    let eigenvalues = a.entries.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    Some(Probe { u, chi, eigenvalues })
}

/// Lifetime and limit verdicts for the mssMp with index `alpha`.
pub fn classify(spec: &MapSpec, alpha: &[f64], opts: &ClassifyOptions) -> Result<ClassificationReport> {
    spec.validate()?;
    let d = spec.dimension();
    if alpha.len() != d {
        return Err(Error::Config(format!("alpha has {} entries, dimension is {d}", alpha.len())));
    }
    let h = opts.step.unwrap_or_else(|| default_step(spec));
    let tol = opts.tol;
    let conditions = Conditions::check(spec, h);
    if !conditions.all_hold() {
        return Err(Error::Condition(conditions.failures().join("; ")));
    }
    let kappa = chi_derivative(spec, alpha, h)
        .map_err(|e| Error::Condition(format!("(c) A(u alpha) has no valid side: {e}")))?;
    let axis_derivatives = (0..d)
        .map(|k| {
            chi_derivative(spec, &axis(d, k), h).map(|r| AxisDerivative {
                axis: k,
                value: r.value,
                side: r.side,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let lifetime = if kappa.value < -tol {
        LifetimeVerdict::FiniteAs
    } else {
        LifetimeVerdict::InfiniteAs
    };
    let limit_case = if axis_derivatives.iter().any(|a| a.value.abs() > tol) {
        Some(LimitCase::AxisDrift)
    } else if kappa.value < -tol {
        Some(LimitCase::NegativeKappa)
    } else if kappa.value > tol {
        Some(LimitCase::PositiveKappa)
    } else {
        None
    };
    let limit = if limit_case.is_some() {
        LimitVerdict::ZeroAs
    } else {
        LimitVerdict::Undetermined
    };

    let mut warnings = Vec::new();
    if kappa.value.abs() <= tol {
        warnings.push(format!("near-critical: |kappa| = {:.3e} <= tol = {tol:.1e}", kappa.value.abs()));
    }
    for a in &axis_derivatives {
        if a.value != 0.0 && a.value.abs() <= tol {
            warnings.push(format!(
                "near-critical: |chi'_{}(0)| = {:.3e} <= tol = {tol:.1e}",
                a.axis,
                a.value.abs()
            ));
        }
    }

    let mut probes = Vec::new();
    for u in [-0.5, -0.1, -2.0 * h, -h, 0.0, h, 2.0 * h, 0.1, 0.5] {
        if let Some(p) = probe(spec, alpha, u) {
            probes.push(p);
        }
    }

    Ok(ClassificationReport {
        alpha: alpha.to_vec(),
        kappa: kappa.value,
        kappa_side: kappa.side,
        kappa_reading: "derivative at u = 0 of the Perron-Frobenius eigenvalue of A(u alpha)".into(),
        axis_derivatives,
        lifetime,
        limit,
        limit_case,
        conditions,
        tol,
        step: h,
        warnings,
        probes,
    })
}
