//! Acceptance criteria AC1-AC9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use moveseg_cli::PipelineConfig;
use moveseg_core::datasetgen::{crop_and_target, sample_seed, to_trimap, DatasetParams, Degradation, Label, Sample, Side, Trimap};
use moveseg_core::evalmetrics::{iou, precision_recall};
use moveseg_core::imgcore::{close, dilate, erode, open, BinaryMask, ProbMap, RasterU8};
use moveseg_core::learner::{gradient_check, infer_mask, train, Architecture, SegNet};
use moveseg_core::motionseg::{build_nn_graph, compute_flows, unlc_segment, GraphWeights, SuperpixelFeature};
use moveseg_core::optflow::dense_flow;
use moveseg_core::shotprune::{prune_frame, PruneReason};
use moveseg_core::synth::{moving_square_video, shape_image, smooth_noise, VideoSpec};

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Outcome {
    Outcome { pass: Some(pass), detail }
}

// ---------------------------------------------------------------- shapes task

const SHAPE_SIDE: usize = 96;
const HELD_OUT: u64 = 200;

fn shape_id(set: u64, i: u64) -> u64 {
    set * 100_000 + i
}

/// Training samples of one seeded set plus the mean IoU of their targets
/// against the clean targets at `s x s`.
fn shapes_train(cfg: &PipelineConfig, set: u64, n: u64, degradation: Degradation) -> (Vec<Sample>, f64) {
    let noisy = DatasetParams { degradation, ..cfg.dataset };
    let clean = DatasetParams { degradation: Degradation::None, ..cfg.dataset };
    let mut samples = Vec::new();
    let mut label_iou = 0.0;
    for i in 0..n {
        let (img, mask) = shape_image(SHAPE_SIDE, shape_id(set, i));
        let prob = ProbMap::from_mask(&mask);
        let seed = sample_seed(set, "shapes", i as usize);
        let (crop, target) = crop_and_target(&img, &prob, &noisy, seed).unwrap();
        let (_, truth) = crop_and_target(&img, &prob, &clean, seed).unwrap();
        label_iou += iou(&target.binarize(0.5), &truth.binarize(0.5)).unwrap();
        samples.push(Sample {
            image: crop,
            target: to_trimap(&target, &noisy.trimap),
            video: format!("shapes{set}"),
            frame: i as usize,
        });
    }
    (samples, label_iou / n as f64)
}

fn shapes_held_out(cfg: &PipelineConfig) -> Vec<(RasterU8, BinaryMask)> {
    let clean = DatasetParams { degradation: Degradation::None, ..cfg.dataset };
    (0..HELD_OUT)
        .map(|i| {
            let (img, mask) = shape_image(SHAPE_SIDE, 1_000_000 + i);
            let seed = sample_seed(999, "held", i as usize);
            let (crop, truth) = crop_and_target(&img, &ProbMap::from_mask(&mask), &clean, seed).unwrap();
            (crop, truth.binarize(0.5))
        })
        .collect()
}

fn train_and_score(cfg: &PipelineConfig, samples: &[Sample], seed: u64, held: &[(RasterU8, BinaryMask)]) -> f64 {
    let net = SegNet::new(cfg.arch.clone(), cfg.dataset.w, 3, cfg.dataset.s, seed).unwrap();
    let config = cfg.train_config();
    let (net, _) = train(&net, samples, &moveseg_core::TrainConfig { rng_seed: seed, ..config }).unwrap();
    held.iter()
        .map(|(crop, gt)| iou(&infer_mask(&net, crop, cfg.eval_threshold).unwrap(), gt).unwrap())
        .sum::<f64>()
        / held.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn ac2(cfg: &PipelineConfig, held: &[(RasterU8, BinaryMask)]) -> Outcome {
    let start = Instant::now();
    let (samples, label_iou) = shapes_train(cfg, 0, 1000, Degradation::Boundary { kernel_size: 5 });
    let model_iou = train_and_score(cfg, &samples, 0, held);
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let gain = model_iou - label_iou;
    verdict(
        gain >= 0.05 && minutes < 15.0 && cfg.train.epochs <= 30,
        format!(
            "denoising: held-out iou {model_iou:.4} vs degraded labels {label_iou:.4}, gain {gain:+.4} (need >= 0.05), {} epochs, {minutes:.1} min (budget 15)",
            cfg.train.epochs
        ),
    )
}

/// Held-out IoU of clean-label training on 1000 samples, one per seed; shared
/// by AC3 and AC9.
fn clean_runs(cfg: &PipelineConfig, held: &[(RasterU8, BinaryMask)]) -> Vec<f64> {
    (0..3)
        .map(|set| {
            let (samples, _) = shapes_train(cfg, set, 1000, Degradation::None);
            train_and_score(cfg, &samples, set, held)
        })
        .collect()
}

/// Held-out IoU of the best predictor that only knows the label distribution:
/// a cell is foreground when more than half of the four side truncations
/// label it positive, mirroring the strict `> 0.5` rule of `infer_mask`.
fn truncation_ceiling(cfg: &PipelineConfig, fraction: f64) -> f64 {
    let clean = DatasetParams { degradation: Degradation::None, ..cfg.dataset };
    let s = cfg.dataset.s;
    let mut total = 0.0;
    for i in 0..HELD_OUT {
        let (img, mask) = shape_image(SHAPE_SIDE, 1_000_000 + i);
        let prob = ProbMap::from_mask(&mask);
        let seed = sample_seed(999, "held", i as usize);
        let (_, truth) = crop_and_target(&img, &prob, &clean, seed).unwrap();
        let (mut pos, mut seen) = (vec![0usize; s * s], vec![0usize; s * s]);
        for side in Side::ALL {
            let p = DatasetParams { degradation: Degradation::Truncate { area_fraction: fraction, side: Some(side) }, ..cfg.dataset };
            let (_, t) = crop_and_target(&img, &prob, &p, seed).unwrap();
            for (k, label) in to_trimap(&t, &p.trimap).labels().iter().enumerate() {
                match label {
                    Label::Positive => {
                        pos[k] += 1;
                        seen[k] += 1;
                    }
                    Label::Negative => seen[k] += 1,
                    Label::DontCare => {}
                }
            }
        }
        let pred = BinaryMask::new(s, s, (0..s * s).map(|k| 2 * pos[k] > seen[k]).collect()).unwrap();
        total += iou(&pred, &truth.binarize(0.5)).unwrap();
    }
    total / HELD_OUT as f64
}

fn ac3(cfg: &PipelineConfig, held: &[(RasterU8, BinaryMask)], clean: &[f64]) -> Outcome {
    let truncated: Vec<f64> = (0..3)
        .map(|set| {
            let (samples, _) = shapes_train(cfg, set, 1000, Degradation::Truncate { area_fraction: 0.25, side: None });
            train_and_score(cfg, &samples, set, held)
        })
        .collect();
    let drops: Vec<f64> = clean.iter().zip(&truncated).map(|(c, t)| c - t).collect();
    let mean = drops.iter().sum::<f64>() / 3.0;
    let spread = drops.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
    let ceiling = truncation_ceiling(cfg, 0.25);
    verdict(
        mean < 0.10 && spread <= 0.05,
        format!(
            "truncation 0.25: clean {:?} vs truncated {:?}, mean drop {mean:.4} (need < 0.10), max seed deviation {spread:.4} (tolerance 0.05); label-distribution ceiling at threshold 0.5: {ceiling:.4}",
            round4(clean),
            round4(&truncated)
        ),
    )
}

fn ac9(cfg: &PipelineConfig, held: &[(RasterU8, BinaryMask)], clean: &[f64]) -> Outcome {
    let small: Vec<f64> = (0..3)
        .map(|set| {
            let (samples, _) = shapes_train(cfg, set, 100, Degradation::None);
            train_and_score(cfg, &samples, set, held)
        })
        .collect();
    let gains: Vec<f64> = clean.iter().zip(&small).map(|(a, b)| a - b).collect();
    let m = median(gains.clone());
    verdict(
        m >= 0.03,
        format!(
            "data scaling: 1000 samples {:?} vs 100 samples {:?}, median gain {m:.4} (need >= 0.03)",
            round4(clean),
            round4(&small)
        ),
    )
}

fn round4(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

// ------------------------------------------------------------ motion criteria

fn ac4() -> Outcome {
    let mut cfg = PipelineConfig::default();
    cfg.unlc.slic.target_regions = 100;
    let spec = VideoSpec::default();
    let mut moving = Vec::new();
    for seed in 0..10 {
        let v = moving_square_video(&spec, seed);
        let gray: Vec<RasterU8> = v.frames.iter().map(RasterU8::to_gray).collect();
        let flows = compute_flows(&gray, &cfg.flow).unwrap();
        let seg = unlc_segment(&v.frames, &flows, &cfg.unlc).unwrap();
        let m: f64 = seg
            .frames
            .iter()
            .zip(&v.masks)
            .map(|(p, gt)| iou(&p.binarize(0.5), gt).unwrap())
            .sum::<f64>()
            / v.masks.len() as f64;
        moving.push(m);
    }
    let moving_mean = moving.iter().sum::<f64>() / 10.0;
    let static_spec = VideoSpec { speed: 0, ..spec };
    let mut fg = Vec::new();
    for seed in 0..10 {
        let v = moving_square_video(&static_spec, 100 + seed);
        let gray: Vec<RasterU8> = v.frames.iter().map(RasterU8::to_gray).collect();
        let flows = compute_flows(&gray, &cfg.flow).unwrap();
        let seg = unlc_segment(&v.frames, &flows, &cfg.unlc).unwrap();
        fg.push(seg.frames.iter().map(|p| p.binarize(0.5).fraction()).sum::<f64>() / seg.frames.len() as f64);
    }
    let static_mean = fg.iter().sum::<f64>() / 10.0;
    verdict(
        moving_mean >= 0.5 && static_mean < 0.05,
        format!("uNLC: moving-square mean iou {moving_mean:.4} (need >= 0.5), static mean fg {static_mean:.4} (need < 0.05)"),
    )
}

fn shifted(base: &RasterU8, dx: isize, dy: isize) -> RasterU8 {
    let (w, h) = (base.width() as isize, base.height() as isize);
    RasterU8::from_fn(base.width(), base.height(), 1, |x, y, _| {
        let sx = (x as isize - dx).clamp(0, w - 1);
        let sy = (y as isize - dy).clamp(0, h - 1);
        base.get(sx as usize, sy as usize, 0)
    })
    .unwrap()
}

fn ac5() -> Outcome {
    let params = PipelineConfig::default().flow;
    let mut worst: f64 = 0.0;
    for (k, (dx, dy)) in [(5, 3), (5, -3), (-5, 3), (-5, -3), (3, 5), (-3, -5)].into_iter().enumerate() {
        let a = smooth_noise(64, 64, 40 + k as u64, 2).to_gray();
        let f = dense_flow(&a, &shifted(&a, dx, dy), &params).unwrap();
        let eu = median(f.u().iter().map(|u| (u - dx as f64).abs()).collect());
        let ev = median(f.v().iter().map(|v| (v - dy as f64).abs()).collect());
        worst = worst.max(eu).max(ev);
    }
    let a = smooth_noise(64, 64, 7, 2).to_gray();
    let f = dense_flow(&a, &a, &params).unwrap();
    let still = f.u().iter().zip(f.v()).map(|(u, v)| u.hypot(*v)).fold(0.0, f64::max);
    verdict(
        worst < 0.5 && still < 0.1,
        format!("flow: worst median per-pixel error {worst:.4} px (need < 0.5), identical frames max |flow| {still:.2e} (need < 0.1)"),
    )
}

// ----------------------------------------------------------- learner checks

fn random_trimap(s: usize, rng: &mut ChaCha8Rng) -> Trimap {
    let labels = (0..s * s)
        .map(|_| match rng.gen_range(0..3) {
            0 => Label::Negative,
            1 => Label::Positive,
            _ => Label::DontCare,
        })
        .collect();
    Trimap::new(s, s, labels).unwrap()
}

fn ac6() -> Outcome {
    let archs = ["conv:4:3:2 conv:6:3:2", "conv:3:3:1 pool:2 conv:5:3:2", "conv:4:5:2 conv:4:3:1 pool:2"];
    let (mut checked, mut kinked, mut failures) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    let mut zero_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (a, arch) in archs.iter().enumerate() {
        let arch: Architecture = arch.parse().unwrap();
        let net = SegNet::new(arch, 12, 3, 3, 100 + a as u64).unwrap();
        for _ in 0..3 {
            let image = RasterU8::from_fn(12, 12, 3, |_, _, _| rng.gen()).unwrap();
            let target = random_trimap(3, &mut rng);
            let r = gradient_check(&net, &image, &target, 1e-3, 1e-3, 1e-6).unwrap();
            checked += r.checked;
            kinked += r.kinked;
            failures += r.failures;
            worst = worst.max(r.worst_relative_error);
            let ignore = Trimap::filled(3, 3, Label::DontCare).unwrap();
            let (_, grad) = net.backward(&image, &ignore).unwrap();
            zero_ok &= grad.iter().all(|&g| g == 0.0);
        }
    }
    verdict(
        failures == 0 && zero_ok && checked > 0,
        format!(
            "gradients: {checked} parameter checks, {failures} failures, worst relative error above the 1e-6 floor {worst:.2e} (need < 1e-3), {kinked} kink-crossing probes skipped; all-dont_care gradient exactly zero: {zero_ok}"
        ),
    )
}

// ------------------------------------------------------------- exact rules

fn random_mask(rng: &mut ChaCha8Rng) -> BinaryMask {
    let (w, h) = (rng.gen_range(1..24), rng.gen_range(1..24));
    let p = rng.gen_range(0.1..0.9);
    BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(p)).unwrap()
}

fn knn_oracle(features: &[SuperpixelFeature], k: usize) -> Vec<Vec<usize>> {
    let raw = |a: &SuperpixelFeature, b: &SuperpixelFeature| -> [f64; 3] {
        let loc = ((a.centroid.0 - b.centroid.0).powi(2) + (a.centroid.1 - b.centroid.1).powi(2)).sqrt();
        let mut chi = 0.0;
        for (p, q) in a.color_hist.iter().zip(&b.color_hist) {
            if p + q > 0.0 {
                chi += (p - q).powi(2) / (p + q);
            }
        }
        let hog = a.hog.iter().zip(&b.hog).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        [loc, chi / 2.0, hog]
    };
    let n = features.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(raw(&features[i], &features[j]));
        }
    }
    let sd: Vec<f64> = (0..3)
        .map(|c| {
            let m = pairs.len() as f64;
            let mean = pairs.iter().map(|p| p[c]).sum::<f64>() / m;
            let var = pairs.iter().map(|p| (p[c] - mean).powi(2)).sum::<f64>() / m;
            if var.sqrt() > 1e-12 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let r = raw(&features[i], &features[j]);
                    (j, r[0] / sd[0] + r[1] / sd[1] + r[2] / sd[2])
                })
                .collect();
            row.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            row.into_iter().take(k).map(|p| p.0).collect()
        })
        .collect()
}

fn ac7() -> Outcome {
    let mut notes = Vec::new();
    // trimap boundaries
    let map = ProbMap::new(4, 1, vec![0.4, 0.7, 0.39, 0.71]).unwrap();
    let t = to_trimap(&map, &PipelineConfig::default().dataset.trimap);
    let trimap_ok = t.labels() == [Label::DontCare, Label::DontCare, Label::Negative, Label::Positive];
    notes.push(format!("trimap {trimap_ok}"));

    // prune rules on 100x100 maps; the border band is 5 px wide
    let params = PipelineConfig::default().prune;
    let frac = |f: f64| BinaryMask::from_fn(100, 100, |x, y| ((y * 100 + x) as f64) < f * 10_000.0).unwrap();
    let centered = |side: usize| {
        let o = (100 - side) / 2;
        BinaryMask::from_fn(100, 100, |x, y| x >= o && x < o + side && y >= o && y < o + side).unwrap()
    };
    let band = |x: usize, y: usize| x < 5 || y < 5 || x >= 95 || y >= 95;
    // 1900 band pixels; 228 of them is 12%
    let mut border = centered(55);
    let mut placed = 0;
    for y in 0..100 {
        for x in 0..100 {
            if band(x, y) && placed < 228 {
                border.set(x, y, true);
                placed += 1;
            }
        }
    }
    let decide = |m: &BinaryMask| prune_frame(&ProbMap::from_mask(m), &params);
    let prune_ok = decide(&frac(0.85)) == (false, PruneReason::TooMuchFg)
        && decide(&centered(22)) == (false, PruneReason::TooLittleFg)
        && decide(&border) == (false, PruneReason::BorderFg)
        && decide(&centered(55)) == (true, PruneReason::Ok);
    notes.push(format!("prune {prune_ok}"));

    // morphology lattice laws
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut morph_ok = true;
    for i in 0..100 {
        let m = random_mask(&mut rng);
        let k = [1, 3, 5, 7][i % 4];
        let (e, d) = (erode(&m, k).unwrap(), dilate(&m, k).unwrap());
        let (o, c) = (open(&m, k).unwrap(), close(&m, k).unwrap());
        morph_ok &= e.is_subset_of(&m) && m.is_subset_of(&d);
        morph_ok &= e.is_subset_of(&o) && o.is_subset_of(&m) && m.is_subset_of(&c);
        morph_ok &= open(&o, k).unwrap() == o && close(&c, k).unwrap() == c;
    }
    notes.push(format!("morphology {morph_ok}"));

    // metric identities
    let mut metric_ok = true;
    for _ in 0..100 {
        let a = random_mask(&mut rng);
        let b = BinaryMask::from_fn(a.width(), a.height(), |_, _| rng.gen_bool(0.5)).unwrap();
        let j = iou(&a, &b).unwrap();
        let (p, r) = precision_recall(&a, &b).unwrap();
        metric_ok &= j <= p.min(r) + 1e-12 && (j - iou(&b, &a).unwrap()).abs() < 1e-15;
    }
    notes.push(format!("metrics {metric_ok}"));

    // k-NN against brute force
    let mut knn_ok = true;
    for (n, seed) in [(50usize, 1u64), (200, 2), (500, 3)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<SuperpixelFeature> = (0..n)
            .map(|i| {
                let mut hist: Vec<f64> = (0..12).map(|_| rng.gen::<f64>()).collect();
                let s: f64 = hist.iter().sum();
                hist.iter_mut().for_each(|v| *v /= s);
                SuperpixelFeature {
                    centroid: (rng.gen(), rng.gen()),
                    color_hist: hist,
                    hog: (0..9).map(|_| rng.gen::<f64>()).collect(),
                    frame_index: i % 5,
                }
            })
            .collect();
        let g = build_nn_graph(&features, 8, GraphWeights { location: 1.0, color: 1.0, hog: 1.0 }).unwrap();
        let oracle = knn_oracle(&features, 8);
        knn_ok &= (0..n).all(|i| g.neighbors(i).iter().map(|p| p.0).collect::<Vec<_>>() == oracle[i]);
    }
    notes.push(format!("knn {knn_ok}"));
    verdict(
        trimap_ok && prune_ok && morph_ok && metric_ok && knn_ok,
        format!("exact rules: {}", notes.join(", ")),
    )
}

// ------------------------------------------------------------- determinism

fn moveseg(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_moveseg"))
        .current_dir(dir)
        .args(args)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn ac8() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.cfg"), "synth.videos = 3\ntrain.epochs = 3\ndegrade.mode = boundary\n").unwrap();
    let mut ran = moveseg(d, &["synth", "--config", "c.cfg", "--seed", "11", "--out", "fx"]);
    for run in ["a", "b"] {
        let ds = format!("{run}/ds");
        let model = format!("{run}/model");
        ran &= moveseg(d, &["dataset", "--config", "c.cfg", "--seed", "4", "--in", "fx/frames", "--masks", "fx/masks", "--out", &ds]);
        ran &= moveseg(d, &["train", "--config", "c.cfg", "--seed", "4", "--in", &ds, "--out", &model]);
        ran &= moveseg(d, &[
            "eval", "--config", "c.cfg", "--seed", "4", "--in", "fx/frames", "--masks", "fx/masks",
            "--model", &format!("{model}/model.ckpt"), "--out", &format!("{run}/eval"),
        ]);
    }
    let files = ["ds/manifest.tsv", "model/model.ckpt", "model/loss.tsv", "eval/scores.tsv"];
    let same: Vec<bool> = files
        .iter()
        .map(|f| {
            let a = fs::read(d.join("a").join(f));
            let b = fs::read(d.join("b").join(f));
            matches!((a, b), (Ok(a), Ok(b)) if a == b)
        })
        .collect();
    let identical = same.iter().all(|&s| s);
    verdict(
        ran && identical,
        format!("determinism: dataset -> train -> eval rerun, commands succeeded: {ran}, byte-identical {files:?}: {same:?}"),
    )
}

// ------------------------------------------------------------------ runner

fn main() {
    let cfg = PipelineConfig::default();
    let mut results: Vec<(&str, Outcome)> = vec![(
        "AC1",
        Outcome {
            pass: None,
            detail: "VOC transfer tables and absolute DAVIS/FBMS/VSB numbers are not reproducible at desk scale; covered by the property substitutes below".into(),
        },
    )];
    let report = |id: &str, o: &Outcome| {
        let status = match o.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "N/A ",
        };
        println!("{id} {status} {}", o.detail);
    };
    report("AC1", &results[0].1);
    let held = shapes_held_out(&cfg);
    let clean = clean_runs(&cfg, &held);
    let cases: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("AC2", Box::new(|| ac2(&cfg, &held))),
        ("AC3", Box::new(|| ac3(&cfg, &held, &clean))),
        ("AC4", Box::new(ac4)),
        ("AC5", Box::new(ac5)),
        ("AC6", Box::new(ac6)),
        ("AC7", Box::new(ac7)),
        ("AC8", Box::new(ac8)),
        ("AC9", Box::new(|| ac9(&cfg, &held, &clean))),
    ];
    for (id, case) in cases {
        let o = case();
        report(id, &o);
        results.push((id, o));
    }
    let failed: Vec<&str> = results.iter().filter(|(_, o)| o.pass == Some(false)).map(|(id, _)| *id).collect();
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed {failed:?}");
        std::process::exit(1);
    }
}
