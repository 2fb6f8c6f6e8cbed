//! Microbenchmarks of the numerical kernels on the hot paths: fractional
//! filtering (direct vs FFT), local Whittle fitting, null-law draws and
//! the synthetic generator.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

use fraccurve_core::dgp::{gen_dgp, DGPParams};
use fraccurve_core::fracdiff::FracFilter;
use fraccurve_core::limitsim::NullSampler;
use fraccurve_core::rng::substream;
use fraccurve_core::spectra::{local_whittle, power_bandwidth, AdmissibleRange};

fn bench_frac_filter(c: &mut Criterion) {
    let mut group = c.benchmark_group("frac_filter");
    for &t_len in &[256_usize, 1024, 4096] {
        let mut rng = substream(1, &[t_len as u64]);
        let base: Vec<f64> = (0..t_len).map(|_| rng.random::<f64>() - 0.5).collect();
        for (label, use_fft) in [("direct", false), ("fft", true)] {
            let filter = FracFilter::with_fft(0.95, t_len, use_fft).unwrap();
            group.bench_with_input(BenchmarkId::new(label, t_len), &base, |b, base| {
                b.iter(|| {
                    let mut x = base.clone();
                    filter.apply_slice(&mut x);
                    black_box(x[x.len() - 1])
                })
            });
        }
    }
    group.finish();
}

fn bench_local_whittle(c: &mut Criterion) {
    let mut group = c.benchmark_group("local_whittle");
    for &t_len in &[500_usize, 2000] {
        let mut rng = substream(2, &[t_len as u64]);
        let mut x: Vec<f64> = (0..t_len).map(|_| rng.random::<f64>() - 0.5).collect();
        FracFilter::new(-0.3, t_len).unwrap().apply_slice(&mut x);
        let m = power_bandwidth(t_len, 0.65);
        group.bench_with_input(BenchmarkId::from_parameter(t_len), &x, |b, x| {
            b.iter(|| local_whittle(black_box(x), m, AdmissibleRange::stationary()).unwrap())
        });
    }
    group.finish();
}

fn bench_null_draw(c: &mut Criterion) {
    let mut group = c.benchmark_group("null_draw");
    let sampler = NullSampler::new(3, 0.95, 0.5, 1000).unwrap();
    let mut rng = substream(3, &[]);
    group.bench_function("pipeline", |b| {
        b.iter(|| black_box(sampler.draw(&mut rng).unwrap().stat_max))
    });
    group.bench_function("direct", |b| {
        b.iter(|| black_box(sampler.draw_direct(&mut rng).unwrap().stat_max))
    });
    group.finish();
}

fn bench_gen_dgp(c: &mut Criterion) {
    let mut group = c.benchmark_group("gen_dgp");
    let params = DGPParams::default();
    for &t_len in &[200_usize, 1000] {
        let mut rng = substream(4, &[t_len as u64]);
        group.bench_with_input(BenchmarkId::from_parameter(t_len), &t_len, |b, &t_len| {
            b.iter(|| black_box(gen_dgp(&params, t_len, &mut rng).unwrap().0.len()))
        });
    }
    group.finish();
}

criterion_group!(
    kernels,
    bench_frac_filter,
    bench_local_whittle,
    bench_null_draw,
    bench_gen_dgp
);
criterion_main!(kernels);
