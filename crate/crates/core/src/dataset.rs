//! Line-delimited trajectory files.
//!
//! The first line is a header record carrying the manifest (and, for labeled
//! files, a provenance block). Every following line is one trajectory. States
//! are stored flat with their dimension; numbers in state, action and reward
//! arrays are written with 17 significant digits so doubles round-trip
//! exactly and files are byte-stable. See `docs/file-format.md`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::LabelConfig;
use crate::postprocess::{OfflineScaleParams, OnlineScaleState};
use crate::reward::{Method, StageKind};
use crate::traj::{DistanceMetric, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub state_dim: usize,
    pub trajectory_count: usize,
    pub expert_ids: Vec<String>,
    pub distance_metric: DistanceMetric,
    pub created_at: String,
}

/// Everything needed to reproduce a labeled file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub method: Method,
    pub stage: StageKind,
    pub config_hash: String,
    pub seed: u64,
    pub config: LabelConfig,
    pub offline: Option<OfflineScaleParams>,
    pub online: Option<OnlineScaleState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTrajectory {
    pub trajectory: Trajectory,
    pub rewards: Vec<f64>,
    /// Demonstration the rewards were computed against.
    pub expert_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub manifest: DatasetManifest,
    pub provenance: Provenance,
    pub trajectories: Vec<LabeledTrajectory>,
}

impl LabeledDataset {
    pub fn validate(&self) -> Result<()> {
        for lt in &self.trajectories {
            if lt.rewards.len() != lt.trajectory.len() {
                return Err(Error::Data(format!(
                    "trajectory '{}' has {} states but {} rewards",
                    lt.trajectory.id(),
                    lt.trajectory.len(),
                    lt.rewards.len()
                )));
            }
            if lt.rewards.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("rewards of '{}'", lt.trajectory.id())));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Header(Box<HeaderRecord>),
    Trajectory(TrajectoryRecord),
}

#[derive(Deserialize)]
struct HeaderRecord {
    #[serde(flatten)]
    manifest: DatasetManifest,
    #[serde(default)]
    provenance: Option<Provenance>,
}

#[derive(Serialize)]
struct HeaderOut<'a> {
    record: &'static str,
    #[serde(flatten)]
    manifest: &'a DatasetManifest,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<&'a Provenance>,
}

#[derive(Deserialize)]
struct TrajectoryRecord {
    id: String,
    dim: usize,
    states: Vec<f64>,
    #[serde(default)]
    action_dim: Option<usize>,
    #[serde(default)]
    actions: Option<Vec<f64>>,
    #[serde(default)]
    rewards: Option<Vec<f64>>,
    #[serde(default)]
    expert: Option<String>,
}

/// Canonical text for a finite double: 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_array(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_number(*v));
    }
    out.push(']');
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

fn write_trajectory(out: &mut String, t: &Trajectory, rewards: Option<&[f64]>, expert: Option<&str>) {
    let _ = write!(
        out,
        "{{\"record\":\"trajectory\",\"id\":{},\"dim\":{},\"states\":",
        json_str(t.id()),
        t.dim()
    );
    push_array(out, t.flat_states());
    if let Some(a) = t.actions() {
        let _ = write!(out, ",\"action_dim\":{},\"actions\":", a.dim);
        push_array(out, &a.values);
    }
    if let Some(r) = rewards {
        out.push_str(",\"rewards\":");
        push_array(out, r);
    }
    if let Some(e) = expert {
        let _ = write!(out, ",\"expert\":{}", json_str(e));
    }
    out.push_str("}\n");
}

fn write_header(out: &mut String, manifest: &DatasetManifest, provenance: Option<&Provenance>) -> Result<()> {
    let rec = HeaderOut {
        record: "header",
        manifest,
        provenance,
    };
    let line = serde_json::to_string(&rec).map_err(|e| Error::Data(e.to_string()))?;
    out.push_str(&line);
    out.push('\n');
    Ok(())
}

/// Encode an unlabeled dataset.
pub fn encode_dataset(manifest: &DatasetManifest, trajectories: &[Trajectory]) -> Result<String> {
    validate_manifest(manifest, trajectories)?;
    let mut out = String::new();
    write_header(&mut out, manifest, None)?;
    for t in trajectories {
        write_trajectory(&mut out, t, None, None);
    }
    Ok(out)
}

pub fn save_dataset(manifest: &DatasetManifest, trajectories: &[Trajectory], path: impl AsRef<Path>) -> Result<()> {
    let text = encode_dataset(manifest, trajectories)?;
    fs::write(path, text)?;
    Ok(())
}

/// Encode a labeled dataset. The manifest's trajectory count is rewritten to
/// the number of labeled trajectories.
pub fn encode_labeled(ds: &LabeledDataset) -> Result<String> {
    ds.validate()?;
    let mut manifest = ds.manifest.clone();
    manifest.trajectory_count = ds.trajectories.len();
    let mut out = String::new();
    write_header(&mut out, &manifest, Some(&ds.provenance))?;
    for lt in &ds.trajectories {
        write_trajectory(&mut out, &lt.trajectory, Some(&lt.rewards), lt.expert_id.as_deref());
    }
    Ok(out)
}

pub fn save_labeled(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let text = encode_labeled(ds)?;
    fs::write(path, text)?;
    Ok(())
}

fn validate_manifest(manifest: &DatasetManifest, trajectories: &[Trajectory]) -> Result<()> {
    if manifest.state_dim == 0 {
        return Err(Error::Data("manifest state_dim must be >= 1".into()));
    }
    if manifest.expert_ids.is_empty() {
        return Err(Error::Data("manifest lists no expert_ids".into()));
    }
    if manifest.trajectory_count != trajectories.len() {
        return Err(Error::Data(format!(
            "manifest says {} trajectories, found {}",
            manifest.trajectory_count,
            trajectories.len()
        )));
    }
    let mut ids = HashSet::new();
    for t in trajectories {
        if t.dim() != manifest.state_dim {
            return Err(Error::DimensionMismatch {
                expected: manifest.state_dim,
                found: t.dim(),
            });
        }
        if !ids.insert(t.id()) {
            return Err(Error::Data(format!("duplicate trajectory id '{}'", t.id())));
        }
    }
    for e in &manifest.expert_ids {
        if !ids.contains(e.as_str()) {
            return Err(Error::Data(format!("expert '{e}' not found in dataset")));
        }
    }
    Ok(())
}

struct Parsed {
    manifest: DatasetManifest,
    provenance: Option<Provenance>,
    rows: Vec<(Trajectory, Option<Vec<f64>>, Option<String>)>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse(text: &str) -> Result<Parsed> {
    let mut header: Option<HeaderRecord> = None;
    let mut rows = Vec::new();
    let mut ids = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| {
            if ["NaN", "Infinity", "inf"].iter().any(|tok| line.contains(tok)) {
                parse_err(line_no, "non-finite number (NaN/Infinity) in record")
            } else {
                parse_err(line_no, format!("malformed record: {e}"))
            }
        })?;
        match rec {
            Record::Header(h) => {
                if header.is_some() || !rows.is_empty() {
                    return Err(parse_err(
                        line_no,
                        "header record must be the first line and appear once",
                    ));
                }
                if h.manifest.state_dim == 0 {
                    return Err(parse_err(line_no, "state_dim must be >= 1"));
                }
                header = Some(*h);
            }
            Record::Trajectory(r) => {
                let h = header
                    .as_ref()
                    .ok_or_else(|| parse_err(line_no, "trajectory record before header"))?;
                if r.dim != h.manifest.state_dim {
                    return Err(parse_err(
                        line_no,
                        format!(
                            "trajectory '{}' has dim {} but state_dim is {}",
                            r.id, r.dim, h.manifest.state_dim
                        ),
                    ));
                }
                let all = r
                    .states
                    .iter()
                    .chain(r.actions.iter().flatten())
                    .chain(r.rewards.iter().flatten());
                if all.into_iter().any(|v| !v.is_finite()) {
                    return Err(parse_err(line_no, "non-finite number in record"));
                }
                if r.states.is_empty() || r.states.len() % r.dim != 0 {
                    return Err(parse_err(
                        line_no,
                        format!(
                            "trajectory '{}': {} state values is not a positive multiple of dim {}",
                            r.id,
                            r.states.len(),
                            r.dim
                        ),
                    ));
                }
                let mut t = Trajectory::from_flat(r.id.clone(), r.dim, r.states)
                    .map_err(|e| parse_err(line_no, e.to_string()))?;
                match (r.action_dim, r.actions) {
                    (Some(ad), Some(a)) => {
                        t = t.with_actions(ad, a).map_err(|e| parse_err(line_no, e.to_string()))?;
                    }
                    (None, None) => {}
                    _ => return Err(parse_err(line_no, "actions and action_dim must appear together")),
                }
                if let Some(rw) = &r.rewards {
                    if rw.len() != t.len() {
                        return Err(parse_err(
                            line_no,
                            format!("trajectory '{}' has {} states but {} rewards", r.id, t.len(), rw.len()),
                        ));
                    }
                }
                if !ids.insert(r.id.clone()) {
                    return Err(parse_err(line_no, format!("duplicate trajectory id '{}'", r.id)));
                }
                rows.push((t, r.rewards, r.expert));
            }
        }
    }
    let header = header.ok_or_else(|| Error::Data("no trajectories".into()))?;
    if rows.is_empty() {
        return Err(Error::Data("no trajectories".into()));
    }
    let m = &header.manifest;
    if m.trajectory_count != rows.len() {
        return Err(parse_err(
            1,
            format!(
                "manifest says {} trajectories, found {}",
                m.trajectory_count,
                rows.len()
            ),
        ));
    }
    if m.expert_ids.is_empty() {
        return Err(parse_err(1, "manifest lists no expert_ids"));
    }
    Ok(Parsed {
        manifest: header.manifest,
        provenance: header.provenance,
        rows,
    })
}

/// Parse an unlabeled (or labeled, rewards ignored) dataset from text.
pub fn decode_dataset(text: &str) -> Result<(DatasetManifest, Vec<Trajectory>)> {
    let p = parse(text)?;
    let ids: HashSet<&str> = p.rows.iter().map(|(t, _, _)| t.id()).collect();
    if let Some(missing) = p.manifest.expert_ids.iter().find(|e| !ids.contains(e.as_str())) {
        return Err(parse_err(1, format!("expert '{missing}' not found in dataset")));
    }
    Ok((p.manifest, p.rows.into_iter().map(|(t, _, _)| t).collect()))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<Trajectory>)> {
    decode_dataset(&fs::read_to_string(path)?)
}

/// Parse a labeled dataset; every trajectory must carry rewards. Expert ids
/// may refer to trajectories that were not labeled.
pub fn decode_labeled(text: &str) -> Result<LabeledDataset> {
    let p = parse(text)?;
    let provenance = p
        .provenance
        .ok_or_else(|| parse_err(1, "header has no provenance block; not a labeled file"))?;
    let trajectories = p
        .rows
        .into_iter()
        .map(|(t, r, e)| {
            let rewards = r.ok_or_else(|| Error::Data(format!("trajectory '{}' has no rewards", t.id())))?;
            Ok(LabeledTrajectory {
                trajectory: t,
                rewards,
                expert_id: e,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LabeledDataset {
        manifest: p.manifest,
        provenance,
        trajectories,
    })
}

pub fn load_labeled(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    decode_labeled(&fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetStats {
    pub trajectory_count: usize,
    pub max_return: f64,
    pub min_return: f64,
    pub step_mean: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Trajectory length → count.
    pub length_histogram: BTreeMap<usize, usize>,
    /// Every trajectory has the same return.
    pub degenerate: bool,
}

/// Return and per-step statistics over a labeled collection. The per-step
/// mean is summed in sorted order so it does not depend on trajectory order.
pub fn dataset_stats(trajectories: &[Trajectory], rewards: &[Vec<f64>]) -> Result<DatasetStats> {
    if trajectories.is_empty() || rewards.is_empty() {
        return Err(Error::Data("dataset_stats needs at least one trajectory".into()));
    }
    if trajectories.len() != rewards.len() {
        return Err(Error::Data(format!(
            "{} trajectories but {} reward series",
            trajectories.len(),
            rewards.len()
        )));
    }
    let mut hist = BTreeMap::new();
    for (t, r) in trajectories.iter().zip(rewards) {
        if t.len() != r.len() {
            return Err(Error::Data(format!(
                "trajectory '{}' length does not match its rewards",
                t.id()
            )));
        }
        *hist.entry(t.len()).or_insert(0) += 1;
    }
    let returns: Vec<f64> = rewards.iter().map(|r| r.iter().sum()).collect();
    let max_return = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_return = returns.iter().copied().fold(f64::INFINITY, f64::min);
    let mut steps: Vec<f64> = rewards.iter().flatten().copied().collect();
    steps.sort_by(f64::total_cmp);
    let n = steps.len();
    Ok(DatasetStats {
        trajectory_count: trajectories.len(),
        max_return,
        min_return,
        step_mean: steps.iter().sum::<f64>() / n as f64,
        step_min: steps[0],
        step_max: steps[n - 1],
        length_histogram: hist,
        degenerate: max_return == min_return,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(n: usize) -> DatasetManifest {
        DatasetManifest {
            name: "demo".into(),
            state_dim: 2,
            trajectory_count: n,
            expert_ids: vec!["e".into()],
            distance_metric: DistanceMetric::Cosine,
            created_at: "2024-05-01T00:00:00Z".into(),
        }
    }

    fn two() -> Vec<Trajectory> {
        vec![
            Trajectory::from_states("e", &[[0.1, 0.2], [1.0 / 3.0, 2.0]]).unwrap(),
            Trajectory::from_states("a", &[[5.0, -1e-300]]).unwrap(),
        ]
    }

    #[test]
    fn round_trip() {
        let text = encode_dataset(&manifest(2), &two()).unwrap();
        let (m, t) = decode_dataset(&text).unwrap();
        assert_eq!(m.trajectory_count, 2);
        assert_eq!(t, two());
        assert_eq!(encode_dataset(&m, &t).unwrap(), text);
    }

    #[test]
    fn wrong_dim_names_line() {
        let text = encode_dataset(&manifest(2), &two()).unwrap();
        let bad = text.replacen("\"dim\":2", "\"dim\":3", 2);
        let err = decode_dataset(&bad).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_file() {
        assert_eq!(decode_dataset("").unwrap_err().to_string(), "no trajectories");
        let header = encode_dataset(&manifest(2), &two()).unwrap();
        let only_header = header.lines().next().unwrap();
        assert_eq!(decode_dataset(only_header).unwrap_err().to_string(), "no trajectories");
    }

    #[test]
    fn number_format_is_canonical() {
        assert_eq!(format_number(1.0), "1.0000000000000000e0");
        assert_eq!(format_number(-0.25), "-2.5000000000000000e-1");
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0, f64::MIN_POSITIVE] {
            let s = format_number(x);
            let back: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn stats_examples() {
        let trajs = vec![
            Trajectory::from_states("x", &[[0.0, 1.0], [1.0, 1.0]]).unwrap(),
            Trajectory::from_states("y", &[[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]).unwrap(),
        ];
        let rewards = vec![vec![1.0, 1.0], vec![3.0, 2.0, 2.0]];
        let s = dataset_stats(&trajs, &rewards).unwrap();
        assert_eq!((s.max_return, s.min_return), (7.0, 2.0));
        assert_eq!(s.step_min, 1.0);
        assert_eq!(s.step_max, 3.0);
        assert_eq!(s.step_mean, 9.0 / 5.0);
        assert_eq!(s.length_histogram.get(&2), Some(&1));
        assert!(!s.degenerate);

        let single = dataset_stats(&trajs[..1], &rewards[..1]).unwrap();
        assert_eq!(single.max_return, single.min_return);
        assert!(single.degenerate);

        let rev_t: Vec<_> = trajs.iter().rev().cloned().collect();
        let rev_r: Vec<_> = rewards.iter().rev().cloned().collect();
        assert_eq!(dataset_stats(&rev_t, &rev_r).unwrap(), s);

        assert!(dataset_stats(&[], &[]).is_err());
    }
}
