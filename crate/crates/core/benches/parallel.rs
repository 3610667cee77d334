//! Default rayon pool against a single-thread pool on the hot kernels.
//!
//! Run with `cargo bench -p weakns-core --bench parallel`.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;

use weakns::initdata::curl_bump;
use weakns::kato::{kato_iterate, KatoOptions};
use weakns::lorentz::lorentz_quasinorm;
use weakns::stokes::nonlinear_band_limited;
use weakns::{Grid, GridField, TimeGrid};

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let default = rayon::ThreadPoolBuilder::new().build().expect("default pool");
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("single pool");
    vec![("default", default), ("single", single)]
}

fn field(n: usize) -> GridField {
    let grid = Grid::new(n, 4.0).unwrap();
    curl_bump(&grid, 1.0, 1.4, [0.0; 3], 3, 7).unwrap()
}

fn bench_fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral_roundtrip");
    for n in [32, 64] {
        let u = field(n);
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, n), &u, |b, u| {
                b.iter(|| pool.install(|| black_box(u.to_spectral().to_grid())))
            });
        }
    }
    group.finish();
}

fn bench_nonlinear(c: &mut Criterion) {
    let mut group = c.benchmark_group("nonlinear_band_limited");
    for n in [32, 64] {
        let u = field(n);
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, n), &u, |b, u| {
                b.iter(|| pool.install(|| black_box(nonlinear_band_limited(u))))
            });
        }
    }
    group.finish();
}

fn bench_weak_norm(c: &mut Criterion) {
    let mut group = c.benchmark_group("weak_quasinorm");
    let u = field(64);
    for (name, pool) in pools() {
        group.bench_function(name, |b| {
            b.iter(|| pool.install(|| black_box(lorentz_quasinorm(&u, 3.0, f64::INFINITY).unwrap())))
        });
    }
    group.finish();
}

fn bench_kato(c: &mut Criterion) {
    let mut group = c.benchmark_group("kato_iterate");
    group.sample_size(10);
    let u = field(32);
    let times = TimeGrid::uniform(0.1, 8).unwrap();
    let opts = KatoOptions {
        kmax: 3,
        ..Default::default()
    };
    for (name, pool) in pools() {
        group.bench_function(name, |b| {
            b.iter(|| pool.install(|| black_box(kato_iterate(&u, &times, &opts).unwrap().status)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fft, bench_nonlinear, bench_weak_norm, bench_kato);
criterion_main!(benches);
