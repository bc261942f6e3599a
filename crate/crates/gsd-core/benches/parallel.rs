//! Criterion benchmarks comparing the rayon-backed data-parallel paths
//! against the sequential fallback on representative workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gsd_core::exec::Exec;

fn placeholder(c: &mut Criterion) {
    let mut group = c.benchmark_group("exec");
    for exec in [Exec::Auto, Exec::Sequential] {
        group.bench_with_input(
            BenchmarkId::new("map", exec.mode_name()),
            &exec,
            |b, &exec| b.iter(|| gsd_core::exec::map_indexed(exec, 1024, |i| (i as f64).sqrt())),
        );
    }
    group.finish();
}

criterion_group!(benches, placeholder);
criterion_main!(benches);
