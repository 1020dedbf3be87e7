//! Desk-scale checks that labeled rewards rank trajectories sensibly and
//! drive imitation: point-mass ranking suites, a gridworld with tabular
//! Q-learning, and timing probes for the complexity claims.

mod gridworld;
mod pointmass;
mod timing;

pub use gridworld::{expert_demo, gridworld_imitation, Action, CurvePoint, Gridworld, ImitationReport, QLearnerConfig};
pub use pointmass::{gen_pointmass_suite, PointMassSuite, PointMassTask};
pub use timing::{synthetic_pair, timing_probe, write_timing_csv, ProbeMethod, TimingRow, TIMING_CSV_HEADER};

use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::label::{label_raw, squash_with, LabelConfig};

/// Where the rewards fed to an evaluation come from.
#[derive(Clone, Debug)]
pub enum RewardSource {
    /// A labeling method run against the expert demonstration.
    Method(LabelConfig),
    /// The same reward at every step (degenerate control).
    Constant(f64),
    /// Uniform noise in `[0, 1)` (control).
    Random,
    /// The task's own reward: goal indicator in the gridworld, negated detour
    /// magnitude on the point mass.
    GroundTruth,
}

impl RewardSource {
    pub fn label(&self) -> String {
        match self {
            RewardSource::Method(c) => c.method.name().to_string(),
            RewardSource::Constant(_) => "constant".into(),
            RewardSource::Random => "random".into(),
            RewardSource::GroundTruth => "ground-truth".into(),
        }
    }
}

/// Average ranks (1-based), ties share the mean of their positions.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation. Errors when either side has no variation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("spearman needs two equal-length samples of size >= 2"));
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "rank correlation undefined for constant input".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Returns of every agent in the suite under `source`.
pub fn suite_returns(source: &RewardSource, suite: &PointMassSuite, exec: Execution) -> Result<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    match source {
        RewardSource::Method(cfg) => try_map_indexed(suite.agents.len(), exec, |i| {
            let agent = &suite.agents[i];
            let raw = label_raw(cfg, agent, &suite.expert)?;
            let total = match squash_with(cfg, raw.clone(), agent.dim())? {
                Some(s) => s.total(),
                None => raw.total(),
            };
            Ok(total)
        }),
        RewardSource::Constant(c) => Ok(suite.agents.iter().map(|a| c * a.len() as f64).collect()),
        RewardSource::Random => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(suite.seed ^ 0x5eed);
            Ok(suite
                .agents
                .iter()
                .map(|a| (0..a.len()).map(|_| rng.random::<f64>()).sum())
                .collect())
        }
        RewardSource::GroundTruth => Ok(suite.detour_magnitudes.iter().map(|m| -m).collect()),
    }
}

/// Spearman correlation between labeled returns and the true quality order
/// (negated detour magnitude).
pub fn ranking_fidelity(source: &RewardSource, suite: &PointMassSuite) -> Result<f64> {
    ranking_fidelity_with(source, suite, Execution::Parallel)
}

pub fn ranking_fidelity_with(source: &RewardSource, suite: &PointMassSuite, exec: Execution) -> Result<f64> {
    if suite.detour_magnitudes.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::Degenerate("all agents in the suite are identical".into()));
    }
    let returns = suite_returns(source, suite, exec)?;
    let quality: Vec<f64> = suite.detour_magnitudes.iter().map(|m| -m).collect();
    spearman(&returns, &quality)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(ranks(&[10.0, 30.0, 20.0, 20.0]), vec![1.0, 4.0, 2.5, 2.5]);
    }

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &[10.0, 20.0, 30.0, 40.0]).unwrap(), 1.0);
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(spearman(&x, &[1.0, 1.0, 1.0, 1.0]).is_err());
        // oracle: 1 - 6Σd²/(n(n²-1)) with d = (0, 1, -1, 0) → 1 - 12/60
        let r = spearman(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }
}
