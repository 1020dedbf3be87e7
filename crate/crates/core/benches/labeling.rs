use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use proxreward::dataset::DatasetManifest;
use proxreward::harness::synthetic_pair;
use proxreward::label::{label_dataset, LabelConfig};
use proxreward::reward::Method;
use proxreward::traj::{pairwise_cost_with, DistanceMetric, Trajectory};
use proxreward::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn dataset(n: usize, t: usize, d: usize) -> (DatasetManifest, Vec<Trajectory>) {
    let mut trajs = Vec::with_capacity(n);
    for i in 0..n {
        let (a, _) = synthetic_pair(t, d, i as u64).unwrap();
        let flat = a.flat_states().to_vec();
        trajs.push(Trajectory::from_flat(format!("t{i:03}"), d, flat).unwrap());
    }
    let manifest = DatasetManifest {
        name: "bench".into(),
        state_dim: d,
        trajectory_count: n,
        expert_ids: vec!["t000".into()],
        distance_metric: DistanceMetric::Euclidean,
        created_at: String::new(),
    };
    (manifest, trajs)
}

fn label(c: &mut Criterion) {
    let (manifest, trajs) = dataset(64, 200, 4);
    let mut group = c.benchmark_group("label_dataset");
    group.sample_size(10);
    for method in [Method::SegMatch, Method::MinDist, Method::Ot] {
        let mut cfg = LabelConfig::for_method(method);
        cfg.metric = DistanceMetric::Euclidean;
        cfg.sinkhorn.epsilon = 0.1;
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(method.name(), name), &exec, |b, &exec| {
                b.iter(|| label_dataset(&cfg, &manifest, black_box(&trajs), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn cost_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("pairwise_cost");
    for t in [250, 1000] {
        let (a, e) = synthetic_pair(t, 8, 1).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, t), &exec, |b, &exec| {
                b.iter(|| pairwise_cost_with(black_box(&a), &e, DistanceMetric::Euclidean, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, label, cost_matrix);
criterion_main!(benches);
