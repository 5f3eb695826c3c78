use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mjpc_bench::{analysis_of_size, model_of_size, moderate_tilt};
use mjpc_core::bounds::{bound_family, BoundFamily};
use mjpc_core::perturbation::lambda0_coefficients;
use mjpc_core::simulate::{empirical_tails, Sampler, sample_stream};
use mjpc_core::spectral::spectral_decomposition;
use mjpc_core::tilted::{lambda0, lambda0_star};

const SIZES: [usize; 3] = [3, 8, 16];

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral_decomposition");
    for n in SIZES {
        let m = model_of_size(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| spectral_decomposition(black_box(&m.q), &m.pi).unwrap())
        });
    }
    g.finish();
}

fn tilted(c: &mut Criterion) {
    let mut g = c.benchmark_group("lambda0");
    for n in SIZES {
        let a = analysis_of_size(n);
        let small = moderate_tilt(&a);
        g.bench_with_input(BenchmarkId::new("polished", n), &a, |b, a| {
            b.iter(|| lambda0(&a.sd, &a.model.f, black_box(small)))
        });
        g.bench_with_input(BenchmarkId::new("large_tilt", n), &a, |b, a| {
            b.iter(|| lambda0(&a.sd, &a.model.f, black_box(5.0)))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("lambda0_star");
    for n in SIZES {
        let a = analysis_of_size(n);
        let u = 0.4 * a.model.f.max();
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| lambda0_star(&a.sd, &a.model.f, black_box(u)).unwrap())
        });
    }
    g.finish();
}

fn series(c: &mut Criterion) {
    let a = analysis_of_size(6);
    let mut g = c.benchmark_group("series_coefficients");
    for order in [4, 6, 8] {
        g.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &k| {
            b.iter(|| lambda0_coefficients(&a.sd, &a.model.f, k).unwrap())
        });
    }
    g.finish();
}

fn bounds(c: &mut Criterion) {
    let a = analysis_of_size(8);
    let u = 0.3 * a.model.f.max();
    let mut g = c.benchmark_group("bound_family");
    for fam in [BoundFamily::General, BoundFamily::Perturbation, BoundFamily::BernsteinGeneral] {
        g.bench_function(fam.name(), |b| b.iter(|| bound_family(&a, fam, 10.0, black_box(u), None).unwrap()));
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let m = model_of_size(8);
    let mut g = c.benchmark_group("simulation");
    let sampler = Sampler::new(&m);
    let f = m.f.values().to_vec();
    g.bench_function("integral_t100", |b| {
        let mut rng = sample_stream(0, 0);
        b.iter(|| sampler.integral(&f, black_box(100.0), &mut rng))
    });
    g.sample_size(10);
    g.bench_function("tails_10k_t10", |b| {
        b.iter(|| empirical_tails(&m, 10.0, &[0.1, 0.3], 10_000, 7).unwrap())
    });
    g.finish();
}

criterion_group!(benches, spectral, tilted, series, bounds, simulation);
criterion_main!(benches);
