use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::traj::Trajectory;

/// A 2-D point mass moving in a straight line from `start` to `goal`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMassTask {
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub horizon: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for PointMassTask {
    fn default() -> Self {
        Self {
            start: [0.0, 0.0],
            goal: [10.0, 5.0],
            horizon: 50,
            noise_scale: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PointMassSuite {
    pub expert: Trajectory,
    pub agents: Vec<Trajectory>,
    /// Detour magnitude of each agent; larger is worse.
    pub detour_magnitudes: Vec<f64>,
    pub seed: u64,
}

/// Expert: the straight path sampled at `horizon` evenly spaced points.
/// Agent `i` follows the expert plus a smooth sideways detour of peak
/// `noise_scale·(i+1)` (random side) and Gaussian jitter of a tenth of that.
pub fn gen_pointmass_suite(task: &PointMassTask, n_agents: usize) -> Result<PointMassSuite> {
    if task.horizon < 2 {
        return Err(Error::invalid("point-mass horizon must be >= 2"));
    }
    if !(task.noise_scale >= 0.0 && task.noise_scale.is_finite()) {
        return Err(Error::invalid("noise_scale must be >= 0"));
    }
    if n_agents == 0 {
        return Err(Error::invalid("need at least one agent"));
    }
    let [sx, sy] = task.start;
    let [gx, gy] = task.goal;
    let (dx, dy) = (gx - sx, gy - sy);
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return Err(Error::invalid("start and goal coincide"));
    }
    let normal = [-dy / len, dx / len];
    let h = task.horizon;
    let expert_states: Vec<[f64; 2]> = (0..h)
        .map(|k| {
            let u = k as f64 / (h - 1) as f64;
            [sx + u * dx, sy + u * dy]
        })
        .collect();
    let expert = Trajectory::from_states("expert", &expert_states)?;

    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let mut agents = Vec::with_capacity(n_agents);
    let mut mags = Vec::with_capacity(n_agents);
    for i in 0..n_agents {
        let m = task.noise_scale * (i + 1) as f64;
        let z: f64 = StandardNormal.sample(&mut rng);
        let side = if z < 0.0 { -1.0 } else { 1.0 };
        let jitter = 0.1 * m;
        let states: Vec<[f64; 2]> = expert_states
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let bump = (std::f64::consts::PI * k as f64 / (h - 1) as f64).sin();
                let jx: f64 = StandardNormal.sample(&mut rng);
                let jy: f64 = StandardNormal.sample(&mut rng);
                [
                    p[0] + side * m * bump * normal[0] + jitter * jx,
                    p[1] + side * m * bump * normal[1] + jitter * jy,
                ]
            })
            .collect();
        agents.push(Trajectory::from_states(format!("agent-{i:03}"), &states)?);
        mags.push(m);
    }
    Ok(PointMassSuite {
        expert,
        agents,
        detour_magnitudes: mags,
        seed: task.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_agents_equal_expert() {
        let task = PointMassTask {
            noise_scale: 0.0,
            ..Default::default()
        };
        let s = gen_pointmass_suite(&task, 4).unwrap();
        for a in &s.agents {
            assert_eq!(a.flat_states(), s.expert.flat_states());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let task = PointMassTask::default();
        let a = gen_pointmass_suite(&task, 5).unwrap();
        let b = gen_pointmass_suite(&task, 5).unwrap();
        for (x, y) in a.agents.iter().zip(&b.agents) {
            assert_eq!(x, y);
        }
        let c = gen_pointmass_suite(&PointMassTask { seed: 1, ..task }, 5).unwrap();
        assert_ne!(a.agents[0], c.agents[0]);
    }

    #[test]
    fn magnitudes_increase() {
        let s = gen_pointmass_suite(&PointMassTask::default(), 10).unwrap();
        assert!(s.detour_magnitudes.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.expert.len(), 50);
        assert_eq!(s.expert.state(49), &[10.0, 5.0]);
    }
}
