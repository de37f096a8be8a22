use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{from_matrix, LevyBlock, Law, MapSpec, SignState, StateSet};

/// On-disk layout of a spec. Structural shape only; semantic rules are left
/// to `validate_spec` so that every violation can be reported at once.
#[derive(Serialize, Deserialize)]
struct SpecDocument {
    dimension: usize,
    states: Vec<Vec<i8>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    blocks: Vec<LevyBlock>,
    #[serde(default)]
    transition_jumps: BTreeMap<String, Law>,
}

impl Serialize for MapSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let doc = SpecDocument {
            dimension: self.dimension(),
            states: self.states.iter().map(|st| st.signs().to_vec()).collect(),
            q: from_matrix(&self.q),
            alpha: self.alpha.clone(),
            blocks: self.blocks.clone(),
            transition_jumps: self
                .transition_jumps
                .iter()
                .map(|((i, j), l)| (format!("{i}->{j}"), l.clone()))
                .collect(),
        };
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MapSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let doc = SpecDocument::deserialize(d)?;
        if doc.states.is_empty() {
            return Err(D::Error::custom("`states` is empty"));
        }
        if let Some(k) = doc.states.iter().position(|s| s.len() != doc.dimension) {
            return Err(D::Error::custom(format!(
                "state {k} has {} entries but dimension is {}",
                doc.states[k].len(),
                doc.dimension
            )));
        }
        let states = doc
            .states
            .into_iter()
            .map(SignState::new)
            .collect::<crate::Result<Vec<_>>>()
            .and_then(StateSet::new)
            .map_err(D::Error::custom)?;
        let n = doc.q.len();
        if doc.q.iter().any(|r| r.len() != n) {
            return Err(D::Error::custom("`Q` is not square"));
        }
        let q = DMatrix::from_fn(n, n, |i, j| doc.q[i][j]);
        let mut transition_jumps = BTreeMap::new();
        for (key, law) in doc.transition_jumps {
            let (i, j) = parse_pair(&key)
                .ok_or_else(|| D::Error::custom(format!("transition key `{key}` is not of the form \"i->j\"")))?;
            transition_jumps.insert((i, j), law);
        }
        Ok(MapSpec {
            states,
            q,
            alpha: doc.alpha,
            blocks: doc.blocks,
            transition_jumps,
        })
    }
}

fn parse_pair(key: &str) -> Option<(usize, usize)> {
    let (a, b) = key.split_once("->")?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

pub(crate) fn ser_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    from_matrix(m).serialize(s)
}
