//! Method dispatch and the dataset labeling pipeline.

use std::collections::HashSet;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{DatasetManifest, LabeledDataset, LabeledTrajectory, Provenance};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::ot::{ot_reward, temporal_ot_reward, SinkhornConfig, TemporalOtParams};
use crate::postprocess::{
    apply_online_scale, offline_rescale, online_scale, select_best_expert, squash, squash_otr_variant,
    OnlineScaleState, SquashParams, AUTO_REW_SCALE_FACTOR,
};
use crate::proximity::{
    min_dist_reward, min_dist_reward_kdtree, seg_match_reward, seg_window_reward, unified_window_reward, WindowSpec,
};
use crate::reward::{Method, Raw, RewardSeries, Squashed, StageKind};
use crate::traj::{DistanceMetric, Trajectory};

/// How raw rewards are squashed before any rescaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SquashMode {
    /// `α = β = 5` for OT methods, `α = β = 1` otherwise.
    MethodDefault,
    Params {
        alpha: f64,
        beta: f64,
    },
    /// `5·exp(5·T·r/d)`, OT methods only.
    Otr,
    None,
}

impl SquashMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(SquashMode::MethodDefault),
            "otr" => Ok(SquashMode::Otr),
            "none" => Ok(SquashMode::None),
            other => {
                let (a, b) = other
                    .split_once(',')
                    .ok_or_else(|| Error::invalid(format!("bad squash '{other}': use default|otr|none|ALPHA,BETA")))?;
                let parse = |x: &str| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad squash parameter '{x}'")))
                };
                let p = SquashParams::new(parse(a)?, parse(b)?)?;
                Ok(SquashMode::Params {
                    alpha: p.alpha,
                    beta: p.beta,
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostprocessMode {
    None,
    Offline,
    Online,
}

impl std::str::FromStr for PostprocessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PostprocessMode::None),
            "offline" => Ok(PostprocessMode::Offline),
            "online" => Ok(PostprocessMode::Online),
            other => Err(Error::invalid(format!("unknown postprocess mode '{other}'"))),
        }
    }
}

/// Window parameters for the unified method; `b` is a rational like `"7/3"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowParams {
    pub a: u64,
    pub b: String,
    pub c: u64,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            a: 10,
            b: "1".into(),
            c: 10,
        }
    }
}

impl WindowParams {
    pub fn spec(&self) -> Result<WindowSpec> {
        let b: Ratio<u64> = self.b.trim().parse().map_err(|_| {
            Error::invalid(format!(
                "window stride b must be a nonnegative rational, got '{}'",
                self.b
            ))
        })?;
        Ok(WindowSpec::new(self.a, b, self.c))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub method: Method,
    pub metric: DistanceMetric,
    pub squash: SquashMode,
    pub k_c: usize,
    pub k_m: usize,
    pub k_w: usize,
    pub window: WindowParams,
    pub sinkhorn: SinkhornConfig,
    /// Stretch the temporal mask when lengths differ instead of failing.
    pub lenient: bool,
    /// Use the kd-tree for Min-Dist when the metric is euclidean.
    pub kdtree: bool,
    pub postprocess: PostprocessMode,
    pub reward_bias: f64,
    pub auto_rew_scale_factor: f64,
    pub include_expert: bool,
    pub seed: u64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            method: Method::SegMatch,
            metric: DistanceMetric::Cosine,
            squash: SquashMode::MethodDefault,
            k_c: 3,
            k_m: 10,
            k_w: 10,
            window: WindowParams::default(),
            sinkhorn: SinkhornConfig::default(),
            lenient: false,
            kdtree: false,
            postprocess: PostprocessMode::Offline,
            reward_bias: 0.0,
            auto_rew_scale_factor: AUTO_REW_SCALE_FACTOR,
            include_expert: false,
            seed: 0,
        }
    }
}

impl LabelConfig {
    pub fn for_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// Value checks that do not depend on which flags the user set.
    pub fn validate(&self) -> Result<()> {
        if self.k_c == 0 {
            return Err(Error::invalid("k_c must be >= 1"));
        }
        if self.method.is_ot() {
            self.sinkhorn.validate()?;
        }
        if self.method == Method::Unified {
            self.window.spec()?;
        }
        match self.squash {
            SquashMode::Params { alpha, beta } => {
                SquashParams::new(alpha, beta)?;
            }
            SquashMode::Otr if !self.method.is_ot() => {
                return Err(Error::invalid("the otr squash only applies to ot and temporal-ot"));
            }
            SquashMode::None if self.postprocess == PostprocessMode::Offline => {
                return Err(Error::invalid("offline rescaling requires squashed rewards"));
            }
            _ => {}
        }
        if self.kdtree && self.metric != DistanceMetric::Euclidean {
            return Err(Error::invalid("the kd-tree path requires the euclidean metric"));
        }
        if !self.reward_bias.is_finite() {
            return Err(Error::invalid("reward bias must be finite"));
        }
        if !(self.auto_rew_scale_factor > 0.0 && self.auto_rew_scale_factor.is_finite()) {
            return Err(Error::invalid("auto_rew_scale_factor must be > 0"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON encoding of this config.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn squash_params(&self) -> Option<SquashParams> {
        match self.squash {
            SquashMode::MethodDefault => Some(SquashParams::default_for(self.method)),
            SquashMode::Params { alpha, beta } => Some(SquashParams { alpha, beta }),
            SquashMode::Otr | SquashMode::None => None,
        }
    }
}

/// Raw rewards of `tau` against one demonstration.
pub fn label_raw(cfg: &LabelConfig, tau: &Trajectory, expert: &Trajectory) -> Result<RewardSeries<Raw>> {
    match cfg.method {
        Method::Ot => ot_reward(tau, expert, cfg.metric, &cfg.sinkhorn),
        Method::TemporalOt => {
            let params = TemporalOtParams {
                k_c: cfg.k_c,
                k_m: cfg.k_m,
                lenient: cfg.lenient,
            };
            temporal_ot_reward(tau, expert, cfg.metric, &params, &cfg.sinkhorn)
        }
        Method::MinDist if cfg.kdtree => min_dist_reward_kdtree(tau, expert, cfg.metric),
        Method::MinDist => min_dist_reward(tau, expert, cfg.metric),
        Method::SegMatch => seg_match_reward(tau, expert, cfg.metric),
        Method::SegWindow => seg_window_reward(tau, expert, cfg.metric, cfg.k_w, cfg.k_c),
        Method::Unified => unified_window_reward(tau, expert, cfg.metric, &cfg.window.spec()?),
    }
}

/// Squash according to the config; `None` when squashing is disabled.
pub fn squash_with(
    cfg: &LabelConfig,
    raw: RewardSeries<Raw>,
    state_dim: usize,
) -> Result<Option<RewardSeries<Squashed>>> {
    match cfg.squash {
        SquashMode::None => Ok(None),
        SquashMode::Otr => {
            let t = raw.len();
            squash_otr_variant(raw, t, state_dim).map(Some)
        }
        _ => Ok(Some(squash(raw, cfg.squash_params().expect("params mode")))),
    }
}

/// Rewards for one trajectory before dataset-level post-processing.
#[derive(Clone, Debug)]
pub enum StepRewards {
    Raw(RewardSeries<Raw>),
    Squashed(RewardSeries<Squashed>),
}

impl StepRewards {
    pub fn values(&self) -> &[f64] {
        match self {
            StepRewards::Raw(r) => r.values(),
            StepRewards::Squashed(r) => r.values(),
        }
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }
}

/// Label against every demonstration and keep the candidate with the largest
/// total, compared on the squashed scale when squashing is enabled.
pub fn label_best_of(cfg: &LabelConfig, tau: &Trajectory, experts: &[&Trajectory]) -> Result<(usize, StepRewards)> {
    if experts.is_empty() {
        return Err(Error::invalid("at least one expert demonstration is required"));
    }
    let raws = experts
        .iter()
        .map(|e| label_raw(cfg, tau, e))
        .collect::<Result<Vec<_>>>()?;
    if cfg.squash == SquashMode::None {
        let (i, r) = select_best_expert(&raws)?;
        return Ok((i, StepRewards::Raw(r)));
    }
    let squashed = raws
        .into_iter()
        .map(|r| squash_with(cfg, r, tau.dim()).map(|s| s.expect("squash enabled")))
        .collect::<Result<Vec<_>>>()?;
    let (i, s) = select_best_expert(&squashed)?;
    Ok((i, StepRewards::Squashed(s)))
}

/// Label a whole dataset against the manifest's experts and apply the
/// configured post-processing. Output is sorted by trajectory id.
pub fn label_dataset(
    cfg: &LabelConfig,
    manifest: &DatasetManifest,
    trajectories: &[Trajectory],
    exec: Execution,
) -> Result<LabeledDataset> {
    cfg.validate()?;
    let experts: Vec<&Trajectory> = manifest
        .expert_ids
        .iter()
        .map(|id| {
            trajectories
                .iter()
                .find(|t| t.id() == id)
                .ok_or_else(|| Error::Data(format!("expert '{id}' not found in dataset")))
        })
        .collect::<Result<_>>()?;
    let expert_set: HashSet<&str> = manifest.expert_ids.iter().map(String::as_str).collect();

    let mut targets: Vec<&Trajectory> = trajectories
        .iter()
        .filter(|t| cfg.include_expert || !expert_set.contains(t.id()))
        .collect();
    targets.sort_by(|a, b| a.id().cmp(b.id()));
    if targets.is_empty() {
        return Err(Error::Data("no trajectories to label".into()));
    }

    let labeled = try_map_indexed(targets.len(), exec, |k| label_best_of(cfg, targets[k], &experts))?;

    let mut offline = None;
    let mut online = None;
    let (stage, rewards): (StageKind, Vec<Vec<f64>>) = match cfg.postprocess {
        PostprocessMode::None => {
            let stage = if cfg.squash == SquashMode::None {
                StageKind::Raw
            } else {
                StageKind::Squashed
            };
            (stage, labeled.iter().map(|(_, r)| r.values().to_vec()).collect())
        }
        PostprocessMode::Offline => {
            let squashed = labeled
                .iter()
                .map(|(_, r)| match r {
                    StepRewards::Squashed(s) => Ok(s.clone()),
                    StepRewards::Raw(_) => Err(Error::invalid("offline rescaling requires squashed rewards")),
                })
                .collect::<Result<Vec<_>>>()?;
            let (scaled, params) = offline_rescale(squashed, cfg.reward_bias)?;
            offline = Some(params);
            (
                StageKind::Rescaled,
                scaled.into_iter().map(|s| s.into_values()).collect(),
            )
        }
        PostprocessMode::Online => {
            let init = OnlineScaleState::with_factor(cfg.auto_rew_scale_factor);
            let state = match &labeled[0].1 {
                StepRewards::Raw(r) => online_scale(r, init)?,
                StepRewards::Squashed(s) => online_scale(s, init)?,
            };
            online = Some(state);
            let scaled = labeled
                .iter()
                .map(|(_, r)| {
                    let v = match r {
                        StepRewards::Raw(r) => apply_online_scale(r.clone(), &state)?,
                        StepRewards::Squashed(s) => apply_online_scale(s.clone(), &state)?,
                    };
                    Ok(v.into_values())
                })
                .collect::<Result<Vec<_>>>()?;
            (StageKind::Rescaled, scaled)
        }
    };

    let entries = targets
        .iter()
        .zip(labeled.iter())
        .zip(rewards)
        .map(|((t, (ei, _)), r)| LabeledTrajectory {
            trajectory: (*t).clone(),
            rewards: r,
            expert_id: Some(experts[*ei].id().to_string()),
        })
        .collect::<Vec<_>>();

    let manifest = DatasetManifest {
        trajectory_count: entries.len(),
        ..manifest.clone()
    };
    Ok(LabeledDataset {
        manifest,
        provenance: Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            method: cfg.method,
            stage,
            config_hash: cfg.hash_hex(),
            seed: cfg.seed,
            config: cfg.clone(),
            offline,
            online,
        },
        trajectories: entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squash_mode_parsing() {
        assert_eq!(SquashMode::parse("default").unwrap(), SquashMode::MethodDefault);
        assert_eq!(
            SquashMode::parse("2,3").unwrap(),
            SquashMode::Params { alpha: 2.0, beta: 3.0 }
        );
        assert!(SquashMode::parse("0,1").is_err());
        assert!(SquashMode::parse("banana").is_err());
    }

    #[test]
    fn config_checks() {
        let mut c = LabelConfig::default();
        assert!(c.validate().is_ok());
        c.squash = SquashMode::Otr;
        assert!(c.validate().is_err());
        c.method = Method::Ot;
        assert!(c.validate().is_ok());
        c.squash = SquashMode::None;
        assert!(c.validate().is_err());
        c.postprocess = PostprocessMode::None;
        assert!(c.validate().is_ok());
        c.kdtree = true;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_config() {
        let a = LabelConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash_hex(), b.hash_hex());
        b.k_w = 3;
        assert_ne!(a.hash_hex(), b.hash_hex());
        assert_eq!(a.hash_hex().len(), 64);
    }

    #[test]
    fn best_of_picks_closer_expert() {
        let tau = Trajectory::from_states("a", &[[0.0, 1.0], [1.0, 1.0]]).unwrap();
        let far = Trajectory::from_states("e1", &[[5.0, 1.0], [6.0, 1.0]]).unwrap();
        let near = Trajectory::from_states("e2", &[[0.0, 1.0], [1.0, 1.1]]).unwrap();
        let mut cfg = LabelConfig::for_method(Method::SegMatch);
        cfg.metric = DistanceMetric::Euclidean;
        let (i, r) = label_best_of(&cfg, &tau, &[&far, &near]).unwrap();
        assert_eq!(i, 1);
        assert!(matches!(r, StepRewards::Squashed(_)));
    }
}
