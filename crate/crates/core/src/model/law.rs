//! Closed catalog of jump-size distributions.
//!
//! Every law carries both a sampler and a closed-form moment generating
//! function over the same parameters, so Monte Carlo output and the exponent
//! matrix always describe the same process.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StandardUniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;

/// A d-dimensional jump law. A scalar law is the `d = 1` case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Law {
    /// Dirac mass at the origin.
    Zero,
    PointMass { value: Vec<f64> },
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    /// Independent coordinates; coordinate `i` is `+Exp(rate_pos[i])` with
    /// probability `p_pos[i]` and `-Exp(rate_neg[i])` otherwise.
    TwoSidedExp {
        rate_pos: Vec<f64>,
        rate_neg: Vec<f64>,
        p_pos: Vec<f64>,
    },
    /// Image of `inner` under the block-sum map: output coordinate `i` is the
    /// sum of the inner coordinates listed in `blocks[i]`.
    BlockSum { blocks: Vec<Vec<usize>>, inner: Box<Law> },
}

impl Law {
    /// Dimension fixed by the parameters, if any (`Zero` fits every dimension).
    pub fn dim(&self) -> Option<usize> {
        match self {
            Law::Zero => None,
            Law::PointMass { value } => Some(value.len()),
            Law::Gaussian { mean, .. } => Some(mean.len()),
            Law::TwoSidedExp { rate_pos, .. } => Some(rate_pos.len()),
            Law::BlockSum { blocks, .. } => Some(blocks.len()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Law::Zero => true,
            Law::PointMass { value } => value.iter().all(|v| *v == 0.0),
            _ => false,
        }
    }

    /// Checks the parameters against dimension `d`; the error names the rule.
    pub fn check(&self, d: usize) -> std::result::Result<(), String> {
        if let Some(k) = self.dim() {
            if k != d {
                return Err(format!("has dimension {k}, expected {d}"));
            }
        }
        match self {
            Law::Zero => Ok(()),
            Law::PointMass { value } => {
                if value.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err("point mass has a non-finite coordinate".into())
                }
            }
            Law::Gaussian { mean, cov } => {
                if cov.len() != d || cov.iter().any(|r| r.len() != d) {
                    return Err(format!("covariance is not {d}x{d}"));
                }
                if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
                    return Err("non-finite parameter".into());
                }
                let m = to_matrix(cov);
                if !is_symmetric(&m) {
                    return Err("covariance not symmetric".into());
                }
                if !is_psd(&m) {
                    return Err("covariance not PSD".into());
                }
                Ok(())
            }
            Law::TwoSidedExp {
                rate_pos,
                rate_neg,
                p_pos,
            } => {
                if rate_neg.len() != d || p_pos.len() != d {
                    return Err("rate_pos, rate_neg and p_pos differ in length".into());
                }
                for i in 0..d {
                    if !(p_pos[i] >= 0.0 && p_pos[i] <= 1.0) {
                        return Err(format!("p_pos[{i}] = {} outside [0,1]", p_pos[i]));
                    }
                    if p_pos[i] > 0.0 && !(rate_pos[i] > 0.0 && rate_pos[i].is_finite()) {
                        return Err(format!("rate_pos[{i}] must be positive"));
                    }
                    if p_pos[i] < 1.0 && !(rate_neg[i] > 0.0 && rate_neg[i].is_finite()) {
                        return Err(format!("rate_neg[{i}] must be positive"));
                    }
                }
                Ok(())
            }
            Law::BlockSum { blocks, inner } => {
                let Some(k) = inner.dim() else {
                    return Ok(());
                };
                let mut seen = vec![false; k];
                for b in blocks {
                    if b.is_empty() {
                        return Err("empty block".into());
                    }
                    for &j in b {
                        if j >= k || seen[j] {
                            return Err(format!("block index {j} out of range or repeated"));
                        }
                        seen[j] = true;
                    }
                }
                if seen.iter().any(|s| !s) {
                    return Err("blocks do not cover the inner dimension".into());
                }
                inner.check(k)
            }
        }
    }

    /// `E[exp(<u, X>)]` in closed form.
    pub fn mgf(&self, u: &[f64]) -> Result<f64> {
        match self {
            Law::Zero => Ok(1.0),
            Law::PointMass { value } => Ok(dot(value, u).exp()),
            Law::Gaussian { mean, cov } => {
                let mut quad = 0.0;
                for (i, row) in cov.iter().enumerate() {
                    for (j, c) in row.iter().enumerate() {
                        quad += u[i] * c * u[j];
                    }
                }
                Ok((dot(mean, u) + 0.5 * quad).exp())
            }
            Law::TwoSidedExp {
                rate_pos,
                rate_neg,
                p_pos,
            } => {
                let mut m = 1.0;
                for i in 0..rate_pos.len() {
                    m *= two_sided_mgf(rate_pos[i], rate_neg[i], p_pos[i], u[i])?;
                }
                Ok(m)
            }
            Law::BlockSum { blocks, inner } => inner.mgf(&lift(blocks, u)),
        }
    }

    /// Whether `u` lies in the finiteness domain of the mgf.
    pub fn in_domain(&self, u: &[f64]) -> bool {
        self.mgf(u).is_ok()
    }

    /// Mean vector in dimension `d`.
    pub fn mean(&self, d: usize) -> Vec<f64> {
        match self {
            Law::Zero => vec![0.0; d],
            Law::PointMass { value } => value.clone(),
            Law::Gaussian { mean, .. } => mean.clone(),
            Law::TwoSidedExp {
                rate_pos,
                rate_neg,
                p_pos,
            } => (0..rate_pos.len())
                .map(|i| {
                    let up = if p_pos[i] > 0.0 { p_pos[i] / rate_pos[i] } else { 0.0 };
                    let down = if p_pos[i] < 1.0 { (1.0 - p_pos[i]) / rate_neg[i] } else { 0.0 };
                    up - down
                })
                .collect(),
            Law::BlockSum { blocks, inner } => {
                let k = inner.dim().unwrap_or_else(|| blocks.iter().map(|b| b.len()).sum());
                let m = inner.mean(k);
                blocks.iter().map(|b| b.iter().map(|&j| m[j]).sum()).collect()
            }
        }
    }

    /// Precomputes whatever the sampler needs (matrix square roots).
    pub fn prepare(&self, d: usize) -> PreparedLaw {
        match self {
            Law::Zero => PreparedLaw::Zero,
            Law::PointMass { value } => PreparedLaw::Point(value.clone()),
            Law::Gaussian { mean, cov } => PreparedLaw::Gaussian {
                mean: mean.clone(),
                root: psd_sqrt(&to_matrix(cov)),
            },
            Law::TwoSidedExp {
                rate_pos,
                rate_neg,
                p_pos,
            } => PreparedLaw::TwoSided {
                rate_pos: rate_pos.clone(),
                rate_neg: rate_neg.clone(),
                p_pos: p_pos.clone(),
            },
            Law::BlockSum { blocks, inner } => {
                let k = inner.dim().unwrap_or(d);
                PreparedLaw::BlockSum {
                    blocks: blocks.clone(),
                    inner: Box::new(inner.prepare(k)),
                    scratch_dim: k,
                }
            }
        }
    }
}

/// Sampler form of a [`Law`].
#[derive(Debug, Clone)]
pub enum PreparedLaw {
    Zero,
    Point(Vec<f64>),
    Gaussian { mean: Vec<f64>, root: DMatrix<f64> },
    TwoSided {
        rate_pos: Vec<f64>,
        rate_neg: Vec<f64>,
        p_pos: Vec<f64>,
    },
    BlockSum {
        blocks: Vec<Vec<usize>>,
        inner: Box<PreparedLaw>,
        scratch_dim: usize,
    },
}

impl PreparedLaw {
    pub fn is_zero(&self) -> bool {
        matches!(self, PreparedLaw::Zero)
    }

    /// Adds one draw to `out`.
    pub fn add_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            PreparedLaw::Zero => {}
            PreparedLaw::Point(v) => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += x;
                }
            }
            PreparedLaw::Gaussian { mean, root } => {
                let d = mean.len();
                let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
                let y = root * z;
                for i in 0..d {
                    out[i] += mean[i] + y[i];
                }
            }
            PreparedLaw::TwoSided {
                rate_pos,
                rate_neg,
                p_pos,
            } => {
                for i in 0..rate_pos.len() {
                    let coin: f64 = StandardUniform.sample(rng);
                    let e: f64 = Exp1.sample(rng);
                    out[i] += if coin < p_pos[i] {
                        e / rate_pos[i]
                    } else {
                        -e / rate_neg[i]
                    };
                }
            }
            PreparedLaw::BlockSum {
                blocks,
                inner,
                scratch_dim,
            } => {
                let mut tmp = vec![0.0; *scratch_dim];
                inner.add_sample(rng, &mut tmp);
                for (o, b) in out.iter_mut().zip(blocks) {
                    *o += b.iter().map(|&j| tmp[j]).sum::<f64>();
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        self.add_sample(rng, &mut out);
        out
    }
}

fn two_sided_mgf(rp: f64, rn: f64, p: f64, u: f64) -> Result<f64> {
    let mut m = 0.0;
    if p > 0.0 {
        if u >= rp {
            return Err(Error::Domain(format!("u = {u} >= rate_pos = {rp}")));
        }
        m += p * rp / (rp - u);
    }
    if p < 1.0 {
        if u <= -rn {
            return Err(Error::Domain(format!("u = {u} <= -rate_neg = {}", -rn)));
        }
        m += (1.0 - p) * rn / (rn + u);
    }
    Ok(m)
}

/// Pulls a d'-vector back through the block-sum map (transpose action).
fn lift(blocks: &[Vec<usize>], u: &[f64]) -> Vec<f64> {
    let k: usize = blocks.iter().map(|b| b.len()).sum();
    let mut v = vec![0.0; k];
    for (i, b) in blocks.iter().enumerate() {
        for &j in b {
            v[j] = u[i];
        }
    }
    v
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub(crate) fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale))
}

/// Eigenvalue floor of -1e-10.
pub(crate) fn is_psd(m: &DMatrix<f64>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .all(|&l| l >= -1e-10)
}
