//! Reward post-processing: exponential squashing, offline rescaling by global
//! return statistics, online first-episode scaling, and expert selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{Method, Raw, Rescaled, RewardSeries, Squashed, Stage};
use crate::traj::Trajectory;

/// Numerator of the offline rescale factor.
pub const OFFLINE_RETURN_SPAN: f64 = 1000.0;
/// Bias used for Antmaze-style sparse tasks.
pub const ANTMAZE_REWARD_BIAS: f64 = -2.0;
/// Default numerator of the online scale.
pub const AUTO_REW_SCALE_FACTOR: f64 = 10.0;

/// `r ← α·exp(β·r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquashParams {
    pub alpha: f64,
    pub beta: f64,
}

impl SquashParams {
    /// Used for Min-Dist, Seg-match and the window variants.
    pub const SIMPLE: SquashParams = SquashParams { alpha: 1.0, beta: 1.0 };
    /// Used for OT and temporal OT.
    pub const OT: SquashParams = SquashParams { alpha: 5.0, beta: 5.0 };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite() && self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!(
                "squash parameters must be positive, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn default_for(method: Method) -> Self {
        if method.is_ot() {
            Self::OT
        } else {
            Self::SIMPLE
        }
    }
}

pub fn squash(r: RewardSeries<Raw>, p: SquashParams) -> RewardSeries<Squashed> {
    let method = r.method();
    let values = r
        .into_values()
        .into_iter()
        .map(|v| p.alpha * (p.beta * v).exp())
        .collect();
    RewardSeries::from_values(method, values)
}

/// `5·exp(5·T·r/d)`: the OT-specific squash where `T` is the episode length
/// and `d` the state dimension.
pub fn squash_otr_variant(
    r: RewardSeries<Raw>,
    episode_len: usize,
    state_dim: usize,
) -> Result<RewardSeries<Squashed>> {
    if episode_len == 0 || state_dim == 0 {
        return Err(Error::invalid("episode length and state dimension must be >= 1"));
    }
    let factor = 5.0 * episode_len as f64 / state_dim as f64;
    let method = r.method();
    let values = r.into_values().into_iter().map(|v| 5.0 * (factor * v).exp()).collect();
    Ok(RewardSeries::from_values(method, values))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineScaleParams {
    pub reward_scale: f64,
    pub reward_bias: f64,
    pub max_return: f64,
    pub min_return: f64,
}

/// Rescale a whole dataset so that the spread of returns is 1000, then add
/// `bias` to every step.
pub fn offline_rescale(
    dataset: Vec<RewardSeries<Squashed>>,
    bias: f64,
) -> Result<(Vec<RewardSeries<Rescaled>>, OfflineScaleParams)> {
    if !bias.is_finite() {
        return Err(Error::invalid("reward bias must be finite"));
    }
    if dataset.len() < 2 {
        return Err(Error::Degenerate(
            "offline rescaling needs at least two trajectories".into(),
        ));
    }
    let returns: Vec<f64> = dataset.iter().map(RewardSeries::total).collect();
    let max_return = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_return = returns.iter().copied().fold(f64::INFINITY, f64::min);
    // written to also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(max_return > min_return) {
        return Err(Error::Degenerate(format!(
            "all trajectories have the same return ({max_return}); cannot rescale"
        )));
    }
    let reward_scale = OFFLINE_RETURN_SPAN / (max_return - min_return);
    let out = dataset
        .into_iter()
        .map(|s| {
            let method = s.method();
            let values = s.into_values().into_iter().map(|v| reward_scale * v + bias).collect();
            RewardSeries::from_values(method, values)
        })
        .collect();
    Ok((
        out,
        OfflineScaleParams {
            reward_scale,
            reward_bias: bias,
            max_return,
            min_return,
        },
    ))
}

/// Frozen multiplier for online training, set once from the first episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineScaleState {
    pub scale: Option<f64>,
    pub auto_rew_scale_factor: f64,
}

impl Default for OnlineScaleState {
    fn default() -> Self {
        Self {
            scale: None,
            auto_rew_scale_factor: AUTO_REW_SCALE_FACTOR,
        }
    }
}

impl OnlineScaleState {
    pub fn with_factor(auto_rew_scale_factor: f64) -> Self {
        Self {
            scale: None,
            auto_rew_scale_factor,
        }
    }
}

/// Freeze `scale = factor / Σ|r_t|` from the first episode.
pub fn online_scale<S: Stage>(first_episode: &RewardSeries<S>, state: OnlineScaleState) -> Result<OnlineScaleState> {
    if let Some(s) = state.scale {
        return Err(Error::ScaleFrozen(s));
    }
    let sum: f64 = first_episode.values().iter().map(|v| v.abs()).sum();
    // written to also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::Degenerate(format!(
            "first-episode absolute reward sum is {sum}; cannot derive a scale"
        )));
    }
    Ok(OnlineScaleState {
        scale: Some(state.auto_rew_scale_factor / sum),
        auto_rew_scale_factor: state.auto_rew_scale_factor,
    })
}

pub fn apply_online_scale<S: Stage>(r: RewardSeries<S>, state: &OnlineScaleState) -> Result<RewardSeries<Rescaled>> {
    let scale = state
        .scale
        .ok_or_else(|| Error::invalid("online scale has not been set from a first episode"))?;
    let method = r.method();
    let values = r.into_values().into_iter().map(|v| v * scale).collect();
    Ok(RewardSeries::from_values(method, values))
}

/// Pick the candidate with the largest total; ties go to the lowest index.
pub fn select_best_expert<S: Stage>(per_expert: &[RewardSeries<S>]) -> Result<(usize, RewardSeries<S>)> {
    let first = per_expert
        .first()
        .ok_or_else(|| Error::invalid("no candidate reward series"))?;
    if per_expert.iter().any(|s| s.len() != first.len()) {
        return Err(Error::invalid("candidate reward series differ in length"));
    }
    let mut best = 0;
    let mut best_total = first.total();
    for (i, s) in per_expert.iter().enumerate().skip(1) {
        let total = s.total();
        if total > best_total {
            best = i;
            best_total = total;
        }
    }
    Ok((best, per_expert[best].clone()))
}

/// Index of the trajectory with the highest ground-truth return (lowest index
/// on ties).
pub fn select_expert_demo(dataset: &[Trajectory], returns: &[f64]) -> Result<usize> {
    if dataset.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if dataset.len() != returns.len() {
        return Err(Error::invalid(format!(
            "{} trajectories but {} returns",
            dataset.len(),
            returns.len()
        )));
    }
    let mut best = 0;
    for (i, &r) in returns.iter().enumerate().skip(1) {
        if r > returns[best] {
            best = i;
        }
    }
    Ok(best)
}
