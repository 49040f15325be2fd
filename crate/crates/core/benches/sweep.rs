use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use csim_core::harness::{sweep_sr, ExperimentSpec};
use csim_core::Execution;

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep_sr");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let spec = ExperimentSpec {
            trials: 8,
            exec,
            ..ExperimentSpec::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &spec, |b, spec| {
            b.iter(|| black_box(sweep_sr(spec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
