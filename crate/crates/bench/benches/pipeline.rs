use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pitchstyle::converter_model::{center_window, ConverterModel};
use pitchstyle::pitch_tracker::extract_f0;
use pitchstyle::wavelet::{dwt, idwt};
use pitchstyle::{AudioBuffer, ModelConfig, Style, TrackerConfig};

fn bench_dwt(c: &mut Criterion) {
    let mut group = c.benchmark_group("haar");
    for len in [1024usize, 16_384] {
        let x: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
        group.bench_with_input(BenchmarkId::new("dwt_l4", len), &x, |b, x| b.iter(|| dwt(black_box(x), 4).unwrap()));
        let dec = dwt(&x, 4).unwrap();
        group.bench_with_input(BenchmarkId::new("idwt_l4", len), &dec, |b, d| b.iter(|| idwt(black_box(d)).unwrap()));
    }
    group.finish();
}

fn bench_extract(c: &mut Criterion) {
    let sr = 24_000u32;
    let samples = (0..sr as usize)
        .map(|i| 0.5 * (2.0 * PI * 220.0 * i as f64 / sr as f64).sin())
        .collect();
    let audio = AudioBuffer::new(samples, sr).unwrap();
    let config = TrackerConfig::default();
    c.bench_function("extract_f0_1s", |b| b.iter(|| extract_f0(black_box(&audio), &config).unwrap()));
}

fn bench_forward(c: &mut Criterion) {
    let model = ConverterModel::new(ModelConfig::default()).unwrap();
    let w = model.window();
    let low = center_window(&(0..w).map(|i| (i as f64 * 0.1).sin() * 0.05).collect::<Vec<_>>());
    let flags = vec![true; w];
    c.bench_function("converter_forward", |b| {
        b.iter(|| model.forward(black_box(&low), &flags, Style::Vibrato).unwrap())
    });
}

criterion_group!(benches, bench_dwt, bench_extract, bench_forward);
criterion_main!(benches);
