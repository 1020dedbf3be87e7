use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RewardSource;
use crate::error::{Error, Result};
use crate::label::{label_raw, squash_with};
use crate::postprocess::{apply_online_scale, online_scale, OnlineScaleState};
use crate::reward::{Method, RewardSeries, Squashed};
use crate::traj::Trajectory;

const EVAL_EPISODES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
}

/// Deterministic grid. Cells are numbered row-major from the top-left corner,
/// moves into a wall leave the agent in place. Episodes always run for
/// `step_limit` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Gridworld {
    pub width: usize,
    pub height: usize,
    pub goal_cell: usize,
    pub step_limit: usize,
}

impl Default for Gridworld {
    fn default() -> Self {
        Self {
            width: 8,
            height: 8,
            goal_cell: 63,
            step_limit: 32,
        }
    }
}

impl Gridworld {
    pub const START: usize = 0;

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.step_limit == 0 {
            return Err(Error::invalid(
                "gridworld width, height and step_limit must be positive",
            ));
        }
        if self.goal_cell >= self.cells() {
            return Err(Error::invalid(format!(
                "goal cell {} outside a {}x{} grid",
                self.goal_cell, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn step(&self, cell: usize, a: Action) -> usize {
        let (r, c) = (cell / self.width, cell % self.width);
        let (r, c) = match a {
            Action::Up => (r.saturating_sub(1), c),
            Action::Down => ((r + 1).min(self.height - 1), c),
            Action::Left => (r, c.saturating_sub(1)),
            Action::Right => (r, (c + 1).min(self.width - 1)),
        };
        r * self.width + c
    }

    pub fn one_hot(&self, cell: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.cells()];
        v[cell] = 1.0;
        v
    }

    pub fn embed(&self, id: &str, cells: &[usize]) -> Result<Trajectory> {
        let n = self.cells();
        let mut flat = vec![0.0; n * cells.len()];
        for (i, &c) in cells.iter().enumerate() {
            flat[i * n + c] = 1.0;
        }
        Trajectory::from_flat(id, n, flat)
    }
}

/// Shortest staircase path from the start to the goal: alternate right and
/// down while both are needed.
pub fn expert_demo(env: &Gridworld) -> Result<Trajectory> {
    env.validate()?;
    let (gr, gc) = (env.goal_cell / env.width, env.goal_cell % env.width);
    let mut cells = vec![Gridworld::START];
    let (mut r, mut c) = (0usize, 0usize);
    while (r, c) != (gr, gc) {
        if c < gc && (c <= r || r >= gr) {
            c += 1;
        } else {
            r += 1;
        }
        cells.push(r * env.width + c);
    }
    env.embed("expert", &cells)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QLearnerConfig {
    pub episodes: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub exploration_epsilon: f64,
    pub seed: u64,
}

impl Default for QLearnerConfig {
    fn default() -> Self {
        Self {
            episodes: 5000,
            learning_rate: 0.5,
            discount: 0.95,
            exploration_epsilon: 0.2,
            seed: 0,
        }
    }
}

impl QLearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::invalid("episodes must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate must lie in (0, 1]"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::invalid("discount must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.exploration_epsilon) {
            return Err(Error::invalid("exploration_epsilon must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    /// Sum of the rewards the learner received (after online scaling).
    pub episode_return: f64,
    pub reached_goal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImitationReport {
    pub success_rate: f64,
    pub learning_curve: Vec<CurvePoint>,
}

impl ImitationReport {
    /// CSV with header `episode,return,reached_goal`.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("episode,return,reached_goal\n");
        for p in &self.learning_curve {
            s.push_str(&format!(
                "{},{:.16e},{}\n",
                p.episode,
                p.episode_return,
                u8::from(p.reached_goal)
            ));
        }
        s
    }
}

fn greedy(q: &[f64], state: usize, rng: &mut ChaCha8Rng) -> usize {
    let row = &q[state * 4..state * 4 + 4];
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..4).filter(|&a| row[a] == best).collect();
    ties[rng.random_range(0..ties.len())]
}

struct Rewarder<'a> {
    source: &'a RewardSource,
    env: &'a Gridworld,
    expert: &'a Trajectory,
    online: OnlineScaleState,
    rng: ChaCha8Rng,
}

impl Rewarder<'_> {
    /// One reward per transition: the label of the state it lands in.
    fn rewards(&mut self, cells: &[usize]) -> Result<Vec<f64>> {
        let steps = cells.len() - 1;
        match self.source {
            RewardSource::Method(cfg) => {
                let tau = self.env.embed("episode", cells)?;
                let raw = label_raw(cfg, &tau, self.expert)?;
                let squashed = match squash_with(cfg, raw.clone(), tau.dim())? {
                    Some(s) => s,
                    None => RewardSeries::<Squashed>::squashed(raw.method(), raw.into_values()),
                };
                if self.online.scale.is_none() {
                    self.online = online_scale(&squashed, self.online)?;
                }
                let scaled = apply_online_scale(squashed, &self.online)?;
                Ok(scaled.values()[1..].to_vec())
            }
            RewardSource::Constant(c) => Ok(vec![*c; steps]),
            RewardSource::Random => Ok((0..steps).map(|_| self.rng.random::<f64>()).collect()),
            RewardSource::GroundTruth => Ok(cells[1..]
                .iter()
                .map(|&c| f64::from(u8::from(c == self.env.goal_cell)))
                .collect()),
        }
    }
}

/// Tabular Q-learning where the only feedback is the reward from `source`,
/// computed after each episode against the expert and frozen to the online
/// scale of the first episode. Returns the greedy success rate over 100
/// evaluation episodes and the per-episode training curve.
pub fn gridworld_imitation(
    source: &RewardSource,
    env: &Gridworld,
    expert: &Trajectory,
    cfg: &QLearnerConfig,
) -> Result<ImitationReport> {
    env.validate()?;
    cfg.validate()?;
    if expert.dim() != env.cells() {
        return Err(Error::DimensionMismatch {
            expected: env.cells(),
            found: expert.dim(),
        });
    }
    let goal = env.one_hot(env.goal_cell);
    let reaches = expert.states().take(env.step_limit + 1).any(|s| s == goal.as_slice());
    if !reaches {
        return Err(Error::invalid(format!(
            "expert does not reach goal cell {} within {} steps",
            env.goal_cell, env.step_limit
        )));
    }
    if let RewardSource::Method(c) = source {
        c.validate()?;
        if c.method == Method::TemporalOt && !c.lenient && expert.len() != env.step_limit + 1 {
            return Err(Error::invalid(
                "temporal-ot needs lenient mode when the expert and episode lengths differ",
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rewarder = Rewarder {
        source,
        env,
        expert,
        online: match source {
            RewardSource::Method(c) => OnlineScaleState::with_factor(c.auto_rew_scale_factor),
            _ => OnlineScaleState::default(),
        },
        rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed),
    };
    // one table per step: seg-match style rewards depend on the step index,
    // so (cell, step) is the Markov state
    let n = env.cells();
    let h = env.step_limit;
    let at = |t: usize, cell: usize| t * n + cell;
    let mut q = vec![0.0; h * n * 4];
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut cells = Vec::with_capacity(h + 1);
    let mut actions = Vec::with_capacity(h);
    for episode in 0..cfg.episodes {
        cells.clear();
        actions.clear();
        cells.push(Gridworld::START);
        for t in 0..h {
            let s = *cells.last().expect("non-empty");
            let a = if rng.random::<f64>() < cfg.exploration_epsilon {
                rng.random_range(0..4)
            } else {
                greedy(&q, at(t, s), &mut rng)
            };
            actions.push(a);
            cells.push(env.step(s, Action::ALL[a]));
        }
        let rewards = rewarder.rewards(&cells)?;
        if episode == 0 {
            // optimistic start: the best first-episode reward at every remaining step
            let r_max = rewards.iter().copied().fold(0.0, f64::max);
            for t in 0..h {
                q[at(t, 0) * 4..at(t + 1, 0) * 4].fill(r_max * (h - t) as f64);
            }
        }
        for t in (0..h).rev() {
            let (i, a) = (at(t, cells[t]), actions[t]);
            let next = if t + 1 == h {
                0.0
            } else {
                let j = at(t + 1, cells[t + 1]);
                q[j * 4..j * 4 + 4].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let target = rewards[t] + cfg.discount * next;
            q[i * 4 + a] += cfg.learning_rate * (target - q[i * 4 + a]);
        }
        curve.push(CurvePoint {
            episode,
            episode_return: rewards.iter().sum(),
            reached_goal: cells.contains(&env.goal_cell),
        });
    }

    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut successes = 0usize;
    for _ in 0..EVAL_EPISODES {
        let mut s = Gridworld::START;
        let mut hit = s == env.goal_cell;
        for t in 0..h {
            s = env.step(s, Action::ALL[greedy(&q, at(t, s), &mut eval_rng)]);
            hit |= s == env.goal_cell;
        }
        successes += usize::from(hit);
    }
    Ok(ImitationReport {
        success_rate: successes as f64 / EVAL_EPISODES as f64,
        learning_curve: curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::LabelConfig;

    #[test]
    fn walls_clamp() {
        let g = Gridworld::default();
        assert_eq!(g.step(0, Action::Up), 0);
        assert_eq!(g.step(0, Action::Left), 0);
        assert_eq!(g.step(0, Action::Right), 1);
        assert_eq!(g.step(0, Action::Down), 8);
        assert_eq!(g.step(63, Action::Down), 63);
        assert_eq!(g.step(63, Action::Right), 63);
    }

    #[test]
    fn expert_is_shortest_path() {
        let g = Gridworld::default();
        let e = expert_demo(&g).unwrap();
        assert_eq!(e.len(), 15);
        assert_eq!(e.state(14), g.one_hot(63).as_slice());
        for w in 0..14 {
            let a = e.state(w).iter().position(|&v| v == 1.0).unwrap();
            let b = e.state(w + 1).iter().position(|&v| v == 1.0).unwrap();
            assert!(b == a + 1 || b == a + 8);
        }
    }

    #[test]
    fn expert_must_reach_goal() {
        let g = Gridworld::default();
        let bad = g.embed("bad", &[0, 1, 2]).unwrap();
        let err = gridworld_imitation(&RewardSource::GroundTruth, &g, &bad, &QLearnerConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let g = Gridworld::default();
        let e = expert_demo(&g).unwrap();
        let cfg = QLearnerConfig {
            episodes: 200,
            ..Default::default()
        };
        let src = RewardSource::Method(LabelConfig::default());
        let a = gridworld_imitation(&src, &g, &e, &cfg).unwrap();
        let b = gridworld_imitation(&src, &g, &e, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ground_truth_learns_small_grid() {
        let g = Gridworld {
            width: 4,
            height: 4,
            goal_cell: 15,
            step_limit: 12,
        };
        let e = expert_demo(&g).unwrap();
        let cfg = QLearnerConfig {
            episodes: 500,
            ..Default::default()
        };
        let r = gridworld_imitation(&RewardSource::GroundTruth, &g, &e, &cfg).unwrap();
        assert_eq!(r.success_rate, 1.0);
    }
}
