//! Agglomeration of coordinates: `X -> (prod_{i in I_k} X_i)_k` on the mssMp
//! side and `xi -> (sum_{i in I_k} xi_i)_k` on the MAP side.
//!
//! The product is again multi-self-similar only when `alpha` is constant on
//! every block; that condition is checked, never assumed.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::MssmpPath;
use crate::error::{Error, Result};
use crate::model::{from_matrix, to_matrix, Law, LevyBlock, MapSpec, SignState, StateSet};
use crate::sampler::{ChainJump, MapPath, Segment};

/// An ordered partition of the coordinates `0..d` into nonempty blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    dim: usize,
}

impl TryFrom<Vec<Vec<usize>>> for Partition {
    type Error = Error;

    fn try_from(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let d = blocks.iter().map(|b| b.len()).sum();
        Partition::new(blocks, d)
    }
}

impl From<Partition> for Vec<Vec<usize>> {
    fn from(p: Partition) -> Self {
        p.blocks
    }
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>, d: usize) -> Result<Self> {
        let mut seen = vec![false; d];
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::Partition("partition has an empty block".into()));
            }
            for &i in b {
                if i >= d {
                    return Err(Error::Partition(format!("coordinate {i} out of range for dimension {d}")));
                }
                if seen[i] {
                    return Err(Error::Partition(format!("coordinate {i} appears in two blocks")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Partition(format!("coordinate {i} is in no block")));
        }
        Ok(Partition { blocks, dim: d })
    }

    /// Singleton blocks in coordinate order.
    pub fn identity(d: usize) -> Self {
        Partition {
            blocks: (0..d).map(|i| vec![i]).collect(),
            dim: d,
        }
    }

    /// Parses `"0,1;2"`: blocks separated by `;`, 0-based coordinates by `,`.
    pub fn parse(text: &str, d: usize) -> Result<Self> {
        let blocks = text
            .split(';')
            .map(|b| {
                b.split(',')
                    .map(|c| {
                        c.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Partition(format!("`{}` is not a coordinate index", c.trim())))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(blocks, d)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Number of blocks, the agglomerated dimension.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn source_dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return Err(Error::Partition(format!(
                "partition covers {} coordinates, process has {d}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Fails unless `alpha` is constant on every block.
    pub fn check_admissible(&self, alpha: &[f64]) -> Result<()> {
        self.check_dim(alpha.len())?;
        for b in &self.blocks {
            let a0 = alpha[b[0]];
            if let Some(&j) = b.iter().find(|&&j| alpha[j] != a0) {
                return Err(Error::Partition(format!(
                    "alpha is not constant on block {self_block}: alpha[{}] = {a0}, alpha[{j}] = {}",
                    b[0],
                    alpha[j],
                    self_block = fmt_block(b)
                )));
            }
        }
        Ok(())
    }

    /// `alpha'_k`, the common value of `alpha` on block `k`.
    pub fn project_alpha(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.check_admissible(alpha)?;
        Ok(self.blocks.iter().map(|b| alpha[b[0]]).collect())
    }

    pub fn sum(&self, v: &[f64]) -> Vec<f64> {
        self.blocks.iter().map(|b| b.iter().map(|&i| v[i]).sum()).collect()
    }

    pub fn product(&self, v: &[f64]) -> Vec<f64> {
        self.blocks.iter().map(|b| b.iter().map(|&i| v[i]).product()).collect()
    }

    pub fn project_sign(&self, s: &SignState) -> SignState {
        let signs = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&i| s.signs()[i]).product())
            .collect();
        SignState::new(signs).expect("products of signs are signs")
    }

    /// `P C P^T` with `P` the block-sum matrix.
    pub fn project_cov(&self, cov: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let c = to_matrix(cov);
        let k = self.blocks.len();
        let out = nalgebra::DMatrix::from_fn(k, k, |a, b| {
            self.blocks[a]
                .iter()
                .flat_map(|&i| self.blocks[b].iter().map(move |&j| (i, j)))
                .map(|(i, j)| c[(i, j)])
                .sum()
        });
        from_matrix(&out)
    }

    /// Image of a jump law under the block-sum map.
    pub fn project_law(&self, law: &Law) -> Law {
        match law {
            Law::Zero => Law::Zero,
            Law::PointMass { value } => Law::PointMass { value: self.sum(value) },
            Law::Gaussian { mean, cov } => Law::Gaussian {
                mean: self.sum(mean),
                cov: self.project_cov(cov),
            },
            Law::TwoSidedExp {
                rate_pos,
                rate_neg,
                p_pos,
            } if self.blocks.iter().all(|b| b.len() == 1) => {
                let pick = |v: &[f64]| self.blocks.iter().map(|b| v[b[0]]).collect();
                Law::TwoSidedExp {
                    rate_pos: pick(rate_pos),
                    rate_neg: pick(rate_neg),
                    p_pos: pick(p_pos),
                }
            }
            Law::BlockSum { blocks, inner } => Law::BlockSum {
                blocks: self
                    .blocks
                    .iter()
                    .map(|b| b.iter().flat_map(|&j| blocks[j].iter().copied()).collect())
                    .collect(),
                inner: inner.clone(),
            },
            other => Law::BlockSum {
                blocks: self.blocks.clone(),
                inner: Box::new(other.clone()),
            },
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, "{}", parts.join(";"))
    }
}

fn fmt_block(b: &[usize]) -> String {
    let inner: Vec<String> = b.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

/// The MAP of the agglomerated process.
///
/// The chain keeps its states and intensities; a state's sign label becomes
/// the blockwise product, so several states may share a label.
pub fn agglomerate_spec(spec: &MapSpec, partition: &Partition) -> Result<MapSpec> {
    partition.check_dim(spec.dimension())?;
    let alpha = partition.project_alpha(&spec.alpha)?;
    let states = StateSet::new(spec.states.iter().map(|s| partition.project_sign(s)).collect())?;
    let blocks = spec
        .blocks
        .iter()
        .map(|b| LevyBlock {
            drift: partition.sum(&b.drift),
            covariance: partition.project_cov(&b.covariance),
            jump_rate: b.jump_rate,
            jump_law: partition.project_law(&b.jump_law),
            killing_rate: b.killing_rate,
        })
        .collect();
    let transition_jumps: BTreeMap<_, _> = spec
        .transition_jumps
        .iter()
        .map(|(k, l)| (*k, partition.project_law(l)))
        .collect();
    Ok(MapSpec {
        states,
        q: spec.q.clone(),
        alpha,
        blocks,
        transition_jumps,
    })
}

/// Blockwise sums of a MAP path.
pub fn agglomerate_map_path(path: &MapPath, partition: &Partition) -> Result<MapPath> {
    partition.check_dim(path.dim())?;
    let states = StateSet::new(path.states.iter().map(|s| partition.project_sign(s)).collect())?;
    let segments = path
        .segments
        .iter()
        .map(|seg| Segment {
            state: seg.state,
            times: seg.times.clone(),
            xi: seg.xi.iter().map(|x| partition.sum(x)).collect(),
            end_time: seg.end_time,
            end_xi: partition.sum(&seg.end_xi),
        })
        .collect();
    let chain_jumps = path
        .chain_jumps
        .iter()
        .map(|j| ChainJump {
            time: j.time,
            from: j.from,
            to: j.to,
            increment: partition.sum(&j.increment),
        })
        .collect();
    Ok(MapPath {
        states,
        segments,
        chain_jumps,
        killed_at: path.killed_at,
        horizon: path.horizon,
        dt: path.dt,
    })
}

/// Blockwise products of an mssMp path.
pub fn project_path(path: &MssmpPath, partition: &Partition) -> Result<MssmpPath> {
    partition.check_dim(path.dim())?;
    let alpha = partition.project_alpha(&path.alpha)?;
    let states = StateSet::new(path.states.iter().map(|s| partition.project_sign(s)).collect())?;
    Ok(MssmpPath {
        states,
        alpha,
        times: path.times.clone(),
        values: path.values.iter().map(|x| partition.product(x)).collect(),
        labels: path.labels.clone(),
        lifetime: path.lifetime,
        partition: Some(partition.clone()),
    })
}
