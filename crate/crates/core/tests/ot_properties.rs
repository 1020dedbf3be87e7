use proptest::prelude::*;

use proxreward::ot::{
    masked_sinkhorn, ot_reward, sinkhorn, temporal_ot_reward, MaskMatrix, SinkhornConfig, TemporalOtParams,
};
use proxreward::traj::{CostMatrix, DistanceMetric, Trajectory};
use proxreward::Error;

fn cost_strategy(max: usize) -> impl Strategy<Value = CostMatrix> {
    (1..=max, 1..=max).prop_flat_map(|(t, te)| {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, te), t)
            .prop_map(|rows| CostMatrix::from_rows(&rows).unwrap())
    })
}

fn traj_strategy(len: std::ops::RangeInclusive<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), len)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn couplings_meet_both_marginals(c in cost_strategy(8), eps in prop::sample::select(vec![0.01, 0.1, 1.0])) {
        let cfg = SinkhornConfig { epsilon: eps, ..Default::default() };
        let p = sinkhorn(&c, &cfg).unwrap();
        prop_assert!(p.max_marginal_error() <= cfg.marginal_tolerance);
        prop_assert!(p.entries().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn cost_is_monotone_in_epsilon(c in cost_strategy(6)) {
        let mut last = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01] {
            let cfg = SinkhornConfig { epsilon: eps, ..Default::default() };
            let v = match sinkhorn(&c, &cfg) {
                Ok(p) => p.transport_cost(&c),
                // near-tied rows stall just above tol at small eps
                Err(Error::NotConverged { residual, .. }) => return Err(TestCaseError::reject(format!("residual {residual}"))),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            // marginal error up to tol per row, costs below 1, at most 6 rows
            prop_assert!(v <= last + 1e-5, "eps {eps}: {v} after {last}");
            last = v;
        }
    }

    #[test]
    fn masked_plan_vanishes_off_band(c in cost_strategy(10), k_m in 0usize..4) {
        let (t, te) = c.shape();
        let mask = MaskMatrix::band_stretched(t, te, k_m).unwrap();
        let p = match masked_sinkhorn(&c, &mask, &SinkhornConfig::default()) {
            Ok(p) => p,
            // only stretched bands can be infeasible
            Err(Error::InfeasibleMask(m)) if t != te => return Err(TestCaseError::reject(m)),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for i in 0..t {
            for j in 0..te {
                if !mask.allows(i, j) {
                    prop_assert_eq!(p.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn reversal_permutes_ot_rewards(states in traj_strategy(2..=8, 2), expert in traj_strategy(2..=8, 2)) {
        let tau = Trajectory::from_states("a", &states).unwrap();
        let e = Trajectory::from_states("e", &expert).unwrap();
        let cfg = SinkhornConfig { epsilon: 0.1, ..Default::default() };
        let fwd = ot_reward(&tau, &e, DistanceMetric::Euclidean, &cfg).unwrap();
        let rev = ot_reward(&tau.reversed("r"), &e, DistanceMetric::Euclidean, &cfg).unwrap();
        for (x, y) in sorted(fwd.into_values()).iter().zip(sorted(rev.into_values())) {
            prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn solver_is_deterministic(c in cost_strategy(8)) {
        let cfg = SinkhornConfig::default();
        let a = sinkhorn(&c, &cfg).unwrap();
        let b = sinkhorn(&c, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn zero_band_temporal_ot_is_order_sensitive() {
    let e = Trajectory::from_states("e", &[[0.0], [5.0]]).unwrap();
    let fwd = Trajectory::from_states("f", &[[0.0], [5.0]]).unwrap();
    let rev = fwd.reversed("r");
    let params = TemporalOtParams {
        k_c: 1,
        k_m: 0,
        lenient: false,
    };
    let cfg = SinkhornConfig::default();
    let a = temporal_ot_reward(&fwd, &e, DistanceMetric::Euclidean, &params, &cfg).unwrap();
    let b = temporal_ot_reward(&rev, &e, DistanceMetric::Euclidean, &params, &cfg).unwrap();
    assert_eq!(a.values(), &[0.0, 0.0]);
    assert_eq!(b.values(), &[-2.5, -2.5]);
    assert_ne!(sorted(a.into_values()), sorted(b.into_values()));
}
