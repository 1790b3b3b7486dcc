use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use clustertail::exec::{self, Mode};
use clustertail::model::reference;
use clustertail::verify::{check_identities, sweep_with};
use clustertail::{RareEventSet, Seed};

const SAMPLES: u64 = 100_000;

fn bench_sweep(c: &mut Criterion) {
    let model = reference::r2();
    let set = RareEventSet::rect(&[1.0, 0.1], &[2.0, 0.4]).unwrap();
    let n_list = [8, 16, 32, 64];
    let mut group = c.benchmark_group("sweep");
    group.throughput(Throughput::Elements(SAMPLES));
    group.sample_size(10);
    for mode in [Mode::Sequential, Mode::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| {
                exec::with_mode(mode, || {
                    black_box(sweep_with(&model, 0, &n_list, SAMPLES, Seed(1), |x, n| {
                        set.contains_scaled(x, n)
                    }))
                })
            })
        });
    }
    group.finish();
}

fn bench_identities(c: &mut Criterion) {
    let model = reference::r2();
    let mut group = c.benchmark_group("identities");
    group.throughput(Throughput::Elements(SAMPLES / 10));
    group.sample_size(10);
    for mode in [Mode::Sequential, Mode::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| exec::with_mode(mode, || black_box(check_identities(&model, &[20.0], SAMPLES / 10, Seed(1)))))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_identities);
criterion_main!(benches);
