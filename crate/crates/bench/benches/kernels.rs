use std::hint::black_box;

use bhdeskew_core::dataset::InterpolatedRecord;
use bhdeskew_core::loop_energy;
use bhdeskew_core::net::{backward, forward, Architecture, ModelParams, NetInput, Normalization, Workspace};
use bhdeskew_core::raster::{render_source, RasterConfig};
use bhdeskew_core::synth::{generate, SynthSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn record(k: u32) -> InterpolatedRecord {
    InterpolatedRecord::new(generate(&SynthSpec::ellipse(0.1, 50.0, 0.5)).unwrap(), k).unwrap()
}

fn energy(c: &mut Criterion) {
    let mut g = c.benchmark_group("loop_energy");
    for k in [1, 1000] {
        let ir = record(k);
        let src = ir.skewed_loop(ir.skew(7 * k as i64).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(k), &src, |b, s| b.iter(|| loop_energy(black_box(s))));
    }
    g.finish();
}

fn render(c: &mut Criterion) {
    let ir = record(1000);
    let src = ir.skewed_loop(ir.skew(3000).unwrap()).unwrap();
    let mut g = c.benchmark_group("render");
    g.sample_size(20);
    for side in [64, 256] {
        let cfg = RasterConfig::new(side);
        g.bench_with_input(BenchmarkId::from_parameter(side), &cfg, |b, cfg| {
            b.iter(|| render_source(black_box(&src), cfg).unwrap())
        });
    }
    g.finish();
}

fn inputs(side: usize, n: usize) -> Vec<NetInput> {
    let ir = record(1000);
    let cfg = RasterConfig::new(side);
    let imgs: Vec<_> = (0..n as i64)
        .map(|i| render_source(&ir.skewed_loop(ir.skew((i - 4) * 1000).unwrap()).unwrap(), &cfg).unwrap())
        .collect();
    let scalars: Vec<_> = imgs.iter().map(|i| i.scalars()).collect();
    let norm = Normalization::fit(&scalars, 20_000.0).unwrap();
    imgs.iter().map(|i| NetInput::from_image(i, &norm)).collect()
}

fn network(c: &mut Criterion) {
    let mut g = c.benchmark_group("network");
    g.sample_size(10);
    for side in [64, 256] {
        let p = ModelParams::init(Architecture::new(side).unwrap(), 0).unwrap();
        let xs = inputs(side, 8);
        let mut ws = Workspace::new(p.arch());
        g.bench_function(BenchmarkId::new("forward", side), |b| {
            b.iter(|| forward(&p, black_box(&xs[0]), &mut ws).unwrap())
        });
        let ts = vec![0.1; xs.len()];
        g.bench_function(BenchmarkId::new("backward_batch8", side), |b| {
            b.iter(|| backward(&p, black_box(&xs), &ts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, energy, render, network);
criterion_main!(benches);
