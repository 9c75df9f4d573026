use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use rand::Rng;

use puiq::encoding::pu21_encode;
use puiq::metrics::ssim;
use puiq::nn::coral::{coral_loss, FeatureDomain};
use puiq::nn::{backward, forward, ModelConfig, OutputGrads};
use puiq::patches::sample_patches;
use puiq::rng::stream;
use puiq::synth::{gen_reference, ReferenceKind};
use puiq::{FeatureBatch, Grid, LuminanceImage, QualityNetParams};

fn luminance(seed: u64) -> LuminanceImage {
    let mut rng = stream(seed, &[]);
    let g = gen_reference(ReferenceKind::Mixed, (256, 256), &mut rng).unwrap();
    LuminanceImage(g.map(|v| 0.1 + 4000.0 * v * v))
}

fn encode(c: &mut Criterion) {
    let img = luminance(1);
    c.bench_function("pu21_encode 256x256", |b| b.iter(|| pu21_encode(black_box(&img))));
}

fn structural(c: &mut Criterion) {
    let a = pu21_encode(&luminance(1)).values;
    let b2 = pu21_encode(&luminance(2)).values;
    c.bench_function("ssim 256x256", |b| b.iter(|| ssim(black_box(&a), black_box(&b2), 595.0).unwrap()));
}

fn network(c: &mut Criterion) {
    let config = ModelConfig::preset("desk").unwrap();
    let params = QualityNetParams::init(&config, &mut stream(3, &[])).unwrap();
    let r: Grid = luminance(1).into_grid().map(|v| v / 4000.0);
    let d = r.map(|v| (v * 0.9).min(1.0));
    let batch = sample_patches(&r, &d, 32, config.patch_size, 5).unwrap();
    c.bench_function("desk forward 32 patches", |b| b.iter(|| forward(&params, black_box(&batch)).unwrap()));
    let out = forward(&params, &batch).unwrap();
    let upstream = OutputGrads { quality: 1.0, features: None };
    c.bench_function("desk backward 32 patches", |b| {
        b.iter(|| backward(&params, black_box(&out.cache), &upstream).unwrap())
    });
}

fn coral(c: &mut Criterion) {
    let mut rng = stream(4, &[]);
    let mut features = |domain| {
        let a = Array2::from_shape_simple_fn((64, 16), || rng.random_range(-1.0..1.0));
        FeatureBatch::new(a, domain).unwrap()
    };
    let s = features(FeatureDomain::Source);
    let t = features(FeatureDomain::Target);
    c.bench_function("coral 64x16", |b| b.iter(|| coral_loss(black_box(&s), black_box(&t)).unwrap()));
}

criterion_group!(benches, encode, structural, network, coral);
criterion_main!(benches);
