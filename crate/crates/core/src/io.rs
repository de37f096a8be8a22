//! CSV path formats with JSON sidecars.
//!
//! MAP paths: `t,state_index,J1..Jd,xi1..xid`, one row per grid point plus a
//! final row at the end of the window. Left limits at chain jumps are not
//! stored as rows; they are rebuilt from the jump increments in the sidecar.
//!
//! mssMp paths: `t,X1..Xd,orthant_index`; the index is empty once the path
//! sits at 0. The sidecar holds `zeta` (a number, or `"censored"`).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lamperti::{Lifetime, MssmpPath, Partition};
use crate::model::{SignState, StateSet};
use crate::sampler::{ChainJump, MapPath, Segment};

/// `x.csv` -> `x.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn signs_of(states: &StateSet) -> Vec<Vec<i8>> {
    states.iter().map(|s| s.signs().to_vec()).collect()
}

fn states_from(signs: Vec<Vec<i8>>) -> Result<StateSet> {
    StateSet::new(signs.into_iter().map(SignState::new).collect::<Result<Vec<_>>>()?)
}

#[derive(Debug, Serialize, Deserialize)]
struct MapSidecar {
    states: Vec<Vec<i8>>,
    chain_jumps: Vec<ChainJump>,
    killed_at: Option<f64>,
    horizon: f64,
    dt: f64,
}

pub fn map_path_csv(path: &MapPath) -> Result<Vec<u8>> {
    let d = path.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "state_index".into()];
    header.extend((1..=d).map(|i| format!("J{i}")));
    header.extend((1..=d).map(|i| format!("xi{i}")));
    w.write_record(&header)?;
    let mut row = |t: f64, state: usize, xi: &[f64]| -> Result<()> {
        let mut r = vec![t.to_string(), state.to_string()];
        r.extend(path.states.get(state).signs().iter().map(|s| s.to_string()));
        r.extend(xi.iter().map(|v| v.to_string()));
        w.write_record(&r)?;
        Ok(())
    };
    for seg in &path.segments {
        for (t, xi) in seg.times.iter().zip(&seg.xi) {
            row(*t, seg.state, xi)?;
        }
    }
    let last = path.segments.last().ok_or_else(|| Error::Grid("path has no segment".into()))?;
    row(last.end_time, last.state, &last.end_xi)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_map_path(path: &MapPath, csv_path: &Path) -> Result<Vec<PathBuf>> {
    write_atomic(csv_path, &map_path_csv(path)?)?;
    let side = MapSidecar {
        states: signs_of(&path.states),
        chain_jumps: path.chain_jumps.clone(),
        killed_at: path.killed_at,
        horizon: path.horizon,
        dt: path.dt,
    };
    let side_path = sidecar_path(csv_path);
    write_atomic(&side_path, serde_json::to_string_pretty(&side)?.as_bytes())?;
    Ok(vec![csv_path.to_path_buf(), side_path])
}

fn read_rows(csv_path: &Path, width: usize) -> Result<Vec<Vec<String>>> {
    let mut r = csv::Reader::from_path(csv_path)?;
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected {width}",
                csv_path.display(),
                k + 2,
                rec.len()
            )));
        }
        rows.push(rec.iter().map(|s| s.to_string()).collect());
    }
    Ok(rows)
}

fn num(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("{what}: `{s}` is not a number")))
}

pub fn read_map_path(csv_path: &Path) -> Result<MapPath> {
    let side: MapSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(csv_path))?)?;
    let states = states_from(side.states)?;
    let d = states.dim();
    let rows = read_rows(csv_path, 2 + 2 * d)?;
    if rows.len() < 2 {
        return Err(Error::Grid(format!("{} has fewer than two rows", csv_path.display())));
    }
    let mut parsed = Vec::with_capacity(rows.len());
    for (k, r) in rows.iter().enumerate() {
        let what = format!("{} row {}", csv_path.display(), k + 2);
        let t = num(&r[0], &what)?;
        let state: usize = r[1].trim().parse().map_err(|_| Error::Parse(format!("{what}: bad state index")))?;
        if state >= states.len() {
            return Err(Error::Parse(format!("{what}: state index {state} out of range")));
        }
        let xi = r[2 + d..].iter().map(|v| num(v, &what)).collect::<Result<Vec<_>>>()?;
        parsed.push((t, state, xi));
    }
    let (end_t, end_state, end_xi) = parsed.pop().expect("two rows");
    let mut segments: Vec<Segment> = Vec::new();
    let mut jumps = side.chain_jumps.iter();
    for (t, state, xi) in parsed {
        let starts_new = segments.last().is_none_or(|s| s.state != state);
        if starts_new {
            if let Some(prev) = segments.last_mut() {
                let jump = jumps
                    .next()
                    .ok_or_else(|| Error::Parse("state changes more often than the sidecar lists jumps".into()))?;
                prev.end_time = t;
                prev.end_xi = xi.iter().zip(&jump.increment).map(|(a, b)| a - b).collect();
            }
            segments.push(Segment {
                state,
                times: vec![t],
                xi: vec![xi.clone()],
                end_time: t,
                end_xi: xi,
            });
        } else {
            let seg = segments.last_mut().expect("segment");
            seg.times.push(t);
            seg.xi.push(xi);
        }
    }
    let last = segments.last_mut().ok_or_else(|| Error::Grid("no grid rows before the end row".into()))?;
    if last.state != end_state {
        return Err(Error::Parse("end row state differs from the last segment".into()));
    }
    last.end_time = end_t;
    last.end_xi = end_xi;
    Ok(MapPath {
        states,
        segments,
        chain_jumps: side.chain_jumps,
        killed_at: side.killed_at,
        horizon: side.horizon,
        dt: side.dt,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct MssmpSidecar {
    states: Vec<Vec<i8>>,
    alpha: Vec<f64>,
    /// A number, or the string `"censored"`.
    zeta: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    censored_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition: Option<Partition>,
}

pub fn mssmp_path_csv(path: &MssmpPath) -> Result<Vec<u8>> {
    let d = path.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("X{i}")));
    header.push("orthant_index".into());
    w.write_record(&header)?;
    for k in 0..path.len() {
        let mut r = vec![path.times[k].to_string()];
        r.extend(path.values[k].iter().map(|v| v.to_string()));
        r.push(path.labels[k].map_or(String::new(), |l| l.to_string()));
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_mssmp_path(path: &MssmpPath, csv_path: &Path) -> Result<Vec<PathBuf>> {
    write_atomic(csv_path, &mssmp_path_csv(path)?)?;
    let (zeta, censored_at) = match path.lifetime {
        Lifetime::Absorbed { zeta } => (serde_json::json!(zeta), None),
        Lifetime::Censored { at } => (serde_json::json!("censored"), Some(at)),
    };
    let side = MssmpSidecar {
        states: signs_of(&path.states),
        alpha: path.alpha.clone(),
        zeta,
        censored_at,
        partition: path.partition.clone(),
    };
    let side_path = sidecar_path(csv_path);
    write_atomic(&side_path, serde_json::to_string_pretty(&side)?.as_bytes())?;
    Ok(vec![csv_path.to_path_buf(), side_path])
}

pub fn read_mssmp_path(csv_path: &Path) -> Result<MssmpPath> {
    let side: MssmpSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(csv_path))?)?;
    let states = states_from(side.states)?;
    let d = states.dim();
    let rows = read_rows(csv_path, 2 + d)?;
    let (mut times, mut values, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for (k, r) in rows.iter().enumerate() {
        let what = format!("{} row {}", csv_path.display(), k + 2);
        times.push(num(&r[0], &what)?);
        values.push(r[1..=d].iter().map(|v| num(v, &what)).collect::<Result<Vec<_>>>()?);
        let label = r[d + 1].trim();
        labels.push(if label.is_empty() {
            None
        } else {
            let l: usize = label.parse().map_err(|_| Error::Parse(format!("{what}: bad orthant index")))?;
            if l >= states.len() {
                return Err(Error::Parse(format!("{what}: orthant index {l} out of range")));
            }
            Some(l)
        });
    }
    let lifetime = match &side.zeta {
        serde_json::Value::Number(n) => Lifetime::Absorbed {
            zeta: n.as_f64().ok_or_else(|| Error::Parse("zeta is not a finite number".into()))?,
        },
        serde_json::Value::String(s) if s == "censored" => Lifetime::Censored {
            at: side
                .censored_at
                .or_else(|| times.last().copied())
                .ok_or_else(|| Error::Parse("empty path".into()))?,
        },
        other => return Err(Error::Parse(format!("zeta must be a number or \"censored\", got {other}"))),
    };
    Ok(MssmpPath {
        states,
        alpha: side.alpha,
        times,
        values,
        labels,
        lifetime,
        partition: side.partition,
    })
}
