use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use moveseg_core::datasetgen::{to_trimap, TrimapParams};
use moveseg_core::learner::{Architecture, SegNet};
use moveseg_core::optflow::{dense_flow, FlowParams};
use moveseg_core::superpixel::{slic, SlicParams};
use moveseg_core::synth::{moving_square_video, shape_image, VideoSpec};

fn flow(c: &mut Criterion) {
    let v = moving_square_video(&VideoSpec::default(), 1);
    let (a, b) = (v.frames[0].to_gray(), v.frames[1].to_gray());
    let params = FlowParams::default();
    c.bench_function("dense_flow 64x64", |bench| {
        bench.iter(|| dense_flow(black_box(&a), black_box(&b), &params).unwrap())
    });
}

fn superpixels(c: &mut Criterion) {
    let (img, _) = shape_image(96, 2);
    let params = SlicParams::default();
    c.bench_function("slic 96x96", |bench| bench.iter(|| slic(black_box(&img), &params).unwrap()));
}

fn learner(c: &mut Criterion) {
    let (img, mask) = shape_image(64, 3);
    let net = SegNet::new(Architecture::default(), 64, 3, 16, 0).unwrap();
    let small = moveseg_core::imgcore::downsample_mask(&mask, 16).unwrap();
    let target = to_trimap(&small, &TrimapParams::default());
    c.bench_function("segnet forward", |bench| bench.iter(|| net.forward(black_box(&img)).unwrap()));
    c.bench_function("segnet backward", |bench| {
        bench.iter(|| net.backward(black_box(&img), black_box(&target)).unwrap())
    });
}

criterion_group!(benches, flow, superpixels, learner);
criterion_main!(benches);
