use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use planar_dpp::cumulants::cumulant_mc;
use planar_dpp::parallel::{map_indexed, map_indexed_sequential};
use planar_dpp::sampler::{linear_statistic, DppSampler, GridSpec, Window};
use planar_dpp::{Kernel, TestFunction};

fn replicas(c: &mut Criterion) {
    let kernel = Kernel::ginibre().dilate(16.0).unwrap();
    let f = TestFunction::radial(1.0).unwrap();
    let window = Window::centered(2.0).unwrap();
    let sampler = DppSampler::on_disk(&kernel, &window, &GridSpec::new(64).unwrap(), 1.0).unwrap();
    let one = |r: usize| linear_statistic(&sampler.sample(1, r as u64).unwrap(), &f);

    let mut g = c.benchmark_group("replicas");
    g.sample_size(10);
    for n in [32usize, 128] {
        g.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| b.iter(|| map_indexed(n, one)));
        g.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| map_indexed_sequential(n, one))
        });
    }
    g.finish();
}

fn cumulant_blocks(c: &mut Criterion) {
    let kernel = Kernel::ginibre().dilate(16.0).unwrap();
    let f = TestFunction::radial(1.0).unwrap();
    let mut g = c.benchmark_group("cumulant_mc");
    g.sample_size(10);
    // cumulant_mc spreads its blocks over the current pool; a one-thread pool is the sequential baseline
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    g.bench_function("parallel", |b| b.iter(|| cumulant_mc(&kernel, &f, 3, 100_000, 7).unwrap()));
    g.bench_function("sequential", |b| {
        b.iter(|| single.install(|| cumulant_mc(&kernel, &f, 3, 100_000, 7).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, replicas, cumulant_blocks);
criterion_main!(benches);
