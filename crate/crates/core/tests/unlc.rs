use moveseg_core::motionseg::{compute_flows, unlc_segment, UnlcConfig};
use moveseg_core::optflow::FlowParams;
use moveseg_core::superpixel::SlicParams;
use moveseg_core::synth::{color_jitter, moving_square_video, VideoSpec};
use moveseg_core::imgcore::{BinaryMask, RasterU8};

fn iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let inter = a.data().iter().zip(b.data()).filter(|(x, y)| **x && **y).count();
    let union = a.data().iter().zip(b.data()).filter(|(x, y)| **x || **y).count();
    if union == 0 { 1.0 } else { inter as f64 / union as f64 }
}

fn config() -> UnlcConfig {
    UnlcConfig {
        slic: SlicParams { target_regions: 100, ..SlicParams::default() },
        ..UnlcConfig::default()
    }
}

fn segment_iou(frames: &[RasterU8], masks: &[BinaryMask]) -> f64 {
    let flows = compute_flows(frames, &FlowParams::default()).unwrap();
    let seg = unlc_segment(frames, &flows, &config()).unwrap();
    seg.frames.iter().zip(masks).map(|(p, m)| iou(&p.binarize(0.5), m)).sum::<f64>() / masks.len() as f64
}

#[test]
fn moving_square_is_found() {
    let mut total = 0.0;
    for seed in 0..10 {
        let v = moving_square_video(&VideoSpec::default(), seed);
        let s = segment_iou(&v.frames, &v.masks);
        eprintln!("seed {seed}: iou {s:.3}");
        total += s;
    }
    let mean = total / 10.0;
    eprintln!("mean iou {mean:.3}");
    assert!(mean >= 0.5);
}

#[test]
fn static_video_has_little_foreground() {
    let spec = VideoSpec { speed: 0, ..VideoSpec::default() };
    let mut total = 0.0;
    for seed in 0..5 {
        let v = moving_square_video(&spec, seed);
        let flows = compute_flows(&v.frames, &FlowParams::default()).unwrap();
        let seg = unlc_segment(&v.frames, &flows, &config()).unwrap();
        total += seg.frames.iter().map(|p| p.binarize(0.5).fraction()).sum::<f64>() / seg.frames.len() as f64;
    }
    assert!(total / 5.0 < 0.05);
}

#[test]
fn color_jitter_costs_little() {
    let mut clean = 0.0;
    let mut jittered = 0.0;
    for seed in 0..5 {
        let v = moving_square_video(&VideoSpec::default(), seed);
        clean += segment_iou(&v.frames, &v.masks);
        let j: Vec<RasterU8> = v.frames.iter().enumerate().map(|(t, f)| color_jitter(f, 0.1, seed * 100 + t as u64)).collect();
        jittered += segment_iou(&j, &v.masks);
    }
    eprintln!("clean {:.3} jittered {:.3}", clean / 5.0, jittered / 5.0);
    assert!(clean / 5.0 - jittered / 5.0 < 0.15);
}
