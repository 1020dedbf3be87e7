//! Optimal-transport rewards.
//!
//! A trajectory and an expert demonstration are treated as uniform empirical
//! measures over their states. The reward of agent state `i` is the negated
//! transport cost its row of the coupling pays:
//! `r_i = -Σ_j C[i][j] · μ[i][j]`.

mod exact;
mod sinkhorn;

pub use exact::{exact_ot_oracle, ExactSolution, EXACT_ORACLE_MAX_CELLS};
pub use sinkhorn::{masked_sinkhorn, sinkhorn, sinkhorn_fixed_iterations, Coupling, MaskMatrix, SinkhornConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{Method, Raw, RewardSeries};
use crate::traj::{context_cost, pairwise_cost, CostMatrix, DistanceMetric, Trajectory};

/// Per-row reward extraction from a cost matrix and a coupling.
pub fn rewards_from_coupling(cost: &CostMatrix, coupling: &Coupling) -> Vec<f64> {
    assert_eq!(cost.shape(), coupling.shape(), "cost/coupling shape mismatch");
    cost.as_array()
        .rows()
        .into_iter()
        .zip(coupling.entries().rows())
        .map(|(c, p)| -c.iter().zip(p.iter()).map(|(c, p)| c * p).sum::<f64>())
        .collect()
}

pub fn ot_reward(
    tau: &Trajectory,
    expert: &Trajectory,
    metric: DistanceMetric,
    cfg: &SinkhornConfig,
) -> Result<RewardSeries<Raw>> {
    let cost = pairwise_cost(tau, expert, metric)?;
    let plan = sinkhorn(&cost, cfg)?;
    Ok(RewardSeries::from_values(
        Method::Ot,
        rewards_from_coupling(&cost, &plan),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalOtParams {
    /// Context length for the group-wise cost.
    pub k_c: usize,
    /// Mask band half-width.
    pub k_m: usize,
    /// Allow `T != T_e` by stretching the band centre to `round(i·T_e/T)`.
    pub lenient: bool,
}

impl Default for TemporalOtParams {
    fn default() -> Self {
        Self {
            k_c: 3,
            k_m: 10,
            lenient: false,
        }
    }
}

pub fn temporal_ot_reward(
    tau: &Trajectory,
    expert: &Trajectory,
    metric: DistanceMetric,
    params: &TemporalOtParams,
    cfg: &SinkhornConfig,
) -> Result<RewardSeries<Raw>> {
    let (t, te) = (tau.len(), expert.len());
    if t != te && !params.lenient {
        return Err(Error::invalid(format!(
            "temporal OT needs equal lengths in strict mode (got {t} vs {te}); enable lenient mode to stretch the mask"
        )));
    }
    let cost = context_cost(tau, expert, metric, params.k_c)?;
    let mask = MaskMatrix::band_stretched(t, te, params.k_m)?;
    let plan = masked_sinkhorn(&cost, &mask, cfg)?;
    Ok(RewardSeries::from_values(
        Method::TemporalOt,
        rewards_from_coupling(&cost, &plan),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, xs: &[f64]) -> Trajectory {
        let states: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, 1.0]).collect();
        Trajectory::from_states(id, &states).unwrap()
    }

    #[test]
    fn identical_trajectories_near_zero() {
        let t = line("a", &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let r = ot_reward(&t, &t, DistanceMetric::Euclidean, &SinkhornConfig::default()).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r.values().iter().all(|v| (-1e-3..=0.0).contains(v)));
    }

    #[test]
    fn constant_cost_reward() {
        // every agent state equidistant from every expert state
        let a = Trajectory::from_states("a", &[[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]).unwrap();
        let e = Trajectory::from_states("e", &[[3.0, 4.0], [3.0, 4.0]]).unwrap();
        let r = ot_reward(&a, &e, DistanceMetric::Euclidean, &SinkhornConfig::default()).unwrap();
        for v in r.values() {
            assert!((v + 5.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_state_swap() {
        let c = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = sinkhorn(&c, &SinkhornConfig::default()).unwrap();
        for v in rewards_from_coupling(&c, &p) {
            assert!(v.abs() < 1e-2);
        }
    }

    #[test]
    fn temporal_identical_near_zero() {
        let t = line("a", &[0.0, 0.5, 1.5, 3.0, 4.0, 6.0, 7.5, 9.0]);
        let params = TemporalOtParams {
            k_c: 3,
            k_m: 10,
            lenient: false,
        };
        let r = temporal_ot_reward(&t, &t, DistanceMetric::Euclidean, &params, &SinkhornConfig::default()).unwrap();
        assert!(r.values().iter().all(|v| (-1e-3..=0.0).contains(v)));
    }

    #[test]
    fn temporal_zero_band_reward_is_diagonal_cost() {
        let a = line("a", &[0.0, 2.0, 1.0, 5.0, 3.0]);
        let e = line("e", &[1.0, 1.0, 4.0, 2.0, 0.0]);
        let params = TemporalOtParams {
            k_c: 2,
            k_m: 0,
            lenient: false,
        };
        let r = temporal_ot_reward(&a, &e, DistanceMetric::Euclidean, &params, &SinkhornConfig::default()).unwrap();
        let c = context_cost(&a, &e, DistanceMetric::Euclidean, 2).unwrap();
        for (i, v) in r.values().iter().enumerate() {
            let want = -c.get(i, i) / 5.0;
            assert!((v - want).abs() <= 1e-15 * want.abs().max(1.0));
        }
    }

    #[test]
    fn temporal_degenerates_to_plain_ot() {
        let a = line("a", &[0.0, 2.0, 1.0, 5.0, 3.0]);
        let e = line("e", &[1.0, 1.0, 4.0, 2.0, 0.0]);
        let cfg = SinkhornConfig {
            epsilon: 1.0,
            max_iterations: 20_000,
            ..Default::default()
        };
        let plain = ot_reward(&a, &e, DistanceMetric::Euclidean, &cfg).unwrap();
        let params = TemporalOtParams {
            k_c: 1,
            k_m: 5,
            lenient: false,
        };
        let tot = temporal_ot_reward(&a, &e, DistanceMetric::Euclidean, &params, &cfg).unwrap();
        for (x, y) in plain.values().iter().zip(tot.values()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn strict_mode_rejects_unequal_lengths() {
        let a = line("a", &[0.0, 1.0, 2.0]);
        let e = line("e", &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let mut params = TemporalOtParams {
            k_c: 1,
            k_m: 1,
            lenient: false,
        };
        let cfg = SinkhornConfig::default();
        assert!(temporal_ot_reward(&a, &e, DistanceMetric::Euclidean, &params, &cfg).is_err());
        params.lenient = true;
        let r = temporal_ot_reward(&a, &e, DistanceMetric::Euclidean, &params, &cfg).unwrap();
        assert_eq!(r.len(), 3);
    }
}
