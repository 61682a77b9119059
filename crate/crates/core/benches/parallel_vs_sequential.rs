use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use aisgraph::coordinator::{generate, DatasetParams};
use aisgraph::exec::Execution;
use aisgraph::ingest::{assemble_trajectories, resample_trajectory, AisRecord, DEFAULT_DT, DEFAULT_GAP_THRESHOLD};
use aisgraph::injector::sample_anomaly_block;
use aisgraph::neighborhood::{cluster_snapshot, snapshot_at, OpticsParams};
use aisgraph::rng::{domain, stream};
use aisgraph::sample::{generate_sample, SampleSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn corpus() -> Vec<AisRecord> {
    generate_sample(&SampleSpec {
        convoys: 40,
        loners: 50,
        min_hours: 12,
        max_hours: 16,
        ..Default::default()
    })
}

fn block_draws(c: &mut Criterion) {
    let mut g = c.benchmark_group("block_draws_100k");
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| {
                exec.map_range(100_000, |i| {
                    let mut rng = stream(1, &[domain::MONTE_CARLO, i as u64]);
                    sample_anomaly_block(black_box(100), 0.5, &mut rng).0
                })
            })
        });
    }
    g.finish();
}

fn snapshot_clustering(c: &mut Criterion) {
    let recs = corpus();
    let trajs: Vec<_> = assemble_trajectories(&recs, DEFAULT_GAP_THRESHOLD)
        .iter()
        .filter_map(|t| resample_trajectory(t, DEFAULT_DT).ok())
        .collect();
    let mut starts: Vec<i64> = trajs.iter().flat_map(|t| t.states.iter().map(|s| s.t)).collect();
    starts.sort_unstable();
    starts.dedup();
    let params = OpticsParams::default();
    let mut g = c.benchmark_group("optics_snapshots");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, starts.len()), &starts, |b, starts| {
            b.iter(|| exec.map(starts, |&t| cluster_snapshot(&snapshot_at(&trajs, t), &params).n_clusters()))
        });
    }
    g.finish();
}

fn full_generate(c: &mut Criterion) {
    let recs = corpus();
    let params = DatasetParams {
        stride: Some(6),
        ..Default::default()
    };
    let mut g = c.benchmark_group("generate");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| generate(&params, &recs, &[], exec).unwrap().graphs.len()));
    }
    g.finish();
}

criterion_group!(benches, block_draws, snapshot_clustering, full_generate);
criterion_main!(benches);
