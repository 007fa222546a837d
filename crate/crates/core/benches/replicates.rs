use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use twophase::exec::Execution;
use twophase::sim::{run_replicates_with, SimConfig};

fn replicates(c: &mut Criterion) {
    let config = SimConfig {
        replicates: 200,
        ..SimConfig::default()
    };
    let mut group = c.benchmark_group("run_replicates");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::new(name, config.replicates), &exec, |b, &exec| {
            b.iter(|| run_replicates_with(&config, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replicates);
criterion_main!(benches);
