//! One function per subcommand. Every command reads its inputs, runs the
//! pipeline stage and writes canonically ordered artifacts under `--out`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use moveseg_core::datasetgen::{build_dataset, jittered_box, load_dataset, sample_seed, subsample_dataset, FrameSource, JitterParams};
use moveseg_core::evalmetrics::{format_score_report, score_item, SegScore};
use moveseg_core::imgcore::{crop_bilinear, crop_prob, pnm, resize_bilinear, BinaryMask, ProbMap, RasterU8};
use moveseg_core::learner::{infer_mask, load_checkpoint, save_checkpoint, train, SegNet};
use moveseg_core::motionseg::{compute_flows, read_segment_manifest, unlc_segment, write_segment_manifest, SegmentRecord};
use moveseg_core::optflow::save_flow_dump;
use moveseg_core::shotprune::{detect_shots, format_prune_report, parse_prune_report, prune_frame, sample_shot_frames, PruneDecision};
use moveseg_core::superpixel::slic;
use moveseg_core::synth::moving_square_video;
use moveseg_core::{Error, Result};

use crate::config::PipelineConfig;
use crate::overlay::overlay;

/// Paths and overrides shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub masks: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub prune: Option<PathBuf>,
    pub baseline: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub mask: Option<PathBuf>,
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::invalid(flag, "required for this command"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn frame_name(t: usize) -> String {
    format!("{t:05}")
}

/// A video as a sorted list of numbered frame files.
#[derive(Debug, Clone)]
pub struct FrameDir {
    pub name: String,
    pub files: Vec<PathBuf>,
}

fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == ext) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Videos under `root`: either `root` itself holds the frames, or each
/// subdirectory is one video. Sorted by name.
pub fn list_videos(root: &Path, ext: &str) -> Result<Vec<FrameDir>> {
    let direct = files_with_ext(root, ext)?;
    if !direct.is_empty() {
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into());
        return Ok(vec![FrameDir { name, files: direct }]);
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() {
            let files = files_with_ext(&path, ext)?;
            if !files.is_empty() {
                let name = path.file_name().expect("directory entry").to_string_lossy().into_owned();
                dirs.push(FrameDir { name, files });
            }
        }
    }
    if dirs.is_empty() {
        return Err(Error::invalid("--in", format!("no .{ext} frames under {}", root.display())));
    }
    dirs.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(dirs)
}

fn load_frames(video: &FrameDir) -> Result<Vec<RasterU8>> {
    video.files.par_iter().map(pnm::load).collect()
}

pub fn synth(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let out = required(&io.out, "--out")?;
    (0..cfg.synth.videos).into_par_iter().try_for_each(|i| {
        let name = format!("video{i:03}");
        let v = moving_square_video(&cfg.synth.video, sample_seed(cfg.seed, "synth", i));
        let (fdir, mdir) = (out.join("frames").join(&name), out.join("masks").join(&name));
        create_dir(&fdir)?;
        create_dir(&mdir)?;
        for (t, (f, m)) in v.frames.iter().zip(&v.masks).enumerate() {
            pnm::save(f, fdir.join(format!("{}.ppm", frame_name(t))))?;
            pnm::save_mask(m, mdir.join(format!("{}.pgm", frame_name(t))))?;
        }
        Ok(())
    })?;
    println!("wrote {} videos to {}", cfg.synth.videos, out.display());
    Ok(())
}

pub fn flow(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let (input, out) = (required(&io.input, "--in")?, required(&io.out, "--out")?);
    for video in list_videos(input, "ppm")? {
        let frames = load_frames(&video)?;
        let gray: Vec<RasterU8> = frames.iter().map(RasterU8::to_gray).collect();
        let flows = compute_flows(&gray, &cfg.flow)?;
        let dir = out.join(&video.name);
        create_dir(&dir)?;
        for (t, f) in flows.iter().enumerate() {
            save_flow_dump(f, &dir, &frame_name(t))?;
        }
        println!("{}: {} flow fields", video.name, flows.len());
    }
    Ok(())
}

pub fn superpixel(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let (input, out) = (required(&io.input, "--in")?, required(&io.out, "--out")?);
    for video in list_videos(input, "ppm")? {
        let dir = out.join(&video.name);
        create_dir(&dir)?;
        video.files.par_iter().enumerate().try_for_each(|(t, path)| {
            let labeling = slic(&pnm::load(path)?, &cfg.unlc.slic)?;
            labeling.save(dir.join(format!("{}.spx", frame_name(t))))
        })?;
        println!("{}: {} frames", video.name, video.files.len());
    }
    Ok(())
}

pub fn shots(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let (input, out) = (required(&io.input, "--in")?, required(&io.out, "--out")?);
    let mut text = String::from("video\tshot\tstart\tend\n");
    for video in list_videos(input, "ppm")? {
        let shots = detect_shots(&load_frames(&video)?, &cfg.shots)?;
        for (i, s) in shots.iter().enumerate() {
            text.push_str(&format!("{}\t{}\t{}\t{}\n", video.name, i, s.start, s.end));
        }
    }
    create_dir(out)?;
    write_text(&out.join("shots.tsv"), &text)
}

pub fn segment(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let (input, out) = (required(&io.input, "--in")?, required(&io.out, "--out")?);
    let mut records = Vec::new();
    for video in list_videos(input, "ppm")? {
        let frames = load_frames(&video)?;
        let probs_dir = out.join(&video.name).join("probs");
        create_dir(&probs_dir)?;
        for (shot_index, shot) in detect_shots(&frames, &cfg.shots)?.iter().enumerate() {
            if shot.len() < 2 {
                log::warn!("{} frame {}: single-frame shot has no motion, skipped", video.name, shot.start);
                continue;
            }
            let clip = &frames[shot.frames()];
            let gray: Vec<RasterU8> = clip.iter().map(RasterU8::to_gray).collect();
            let flows = compute_flows(&gray, &cfg.flow)?;
            let seg = unlc_segment(clip, &flows, &cfg.unlc)?;
            for (prob, t) in seg.frames.iter().zip(shot.frames()) {
                let rel = format!("{}/probs/{}.pgm", video.name, frame_name(t));
                pnm::save_prob(prob, out.join(&rel))?;
                records.push(SegmentRecord {
                    video: video.name.clone(),
                    frame_index: t,
                    shot: shot_index,
                    prob_file: rel,
                    frame_file: video.files[t].display().to_string(),
                });
            }
        }
        println!("{}: {} frames segmented", video.name, records.iter().filter(|r| r.video == video.name).count());
    }
    write_segment_manifest(out.join("manifest.tsv"), &records)
}

fn prune_decisions(cfg: &PipelineConfig, seg_dir: &Path, records: &[SegmentRecord]) -> Result<Vec<PruneDecision>> {
    let mut decisions: Vec<PruneDecision> = records
        .par_iter()
        .map(|r| {
            let (keep, reason) = prune_frame(&pnm::load_prob(seg_dir.join(&r.prob_file))?, &cfg.prune);
            Ok(PruneDecision { frame_id: r.frame_id(), keep, reason })
        })
        .collect::<Result<_>>()?;
    decisions.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    Ok(decisions)
}

pub fn prune(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let (input, out) = (required(&io.input, "--in")?, required(&io.out, "--out")?);
    let records = read_segment_manifest(input.join("manifest.tsv"))?;
    let decisions = prune_decisions(cfg, input, &records)?;
    create_dir(out)?;
    write_text(&out.join("prune.txt"), &format_prune_report(&decisions))?;
    let kept = decisions.iter().filter(|d| d.keep).count();
    println!("kept {kept} of {} frames", decisions.len());
    Ok(())
}

/// Frame sources from a segmentation directory: the sampled frames of each
/// shot, with keep decisions from a prune report or recomputed.
fn segmentation_sources(cfg: &PipelineConfig, seg_dir: &Path, report: Option<&Path>) -> Result<Vec<FrameSource>> {
    let records = read_segment_manifest(seg_dir.join("manifest.tsv"))?;
    let decisions = match report {
        Some(path) => parse_prune_report(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?,
        None => prune_decisions(cfg, seg_dir, &records)?,
    };
    let keep: HashMap<String, bool> = decisions.into_iter().map(|d| (d.frame_id, d.keep)).collect();
    let mut shots: BTreeMap<(String, usize), Vec<&SegmentRecord>> = BTreeMap::new();
    for r in &records {
        shots.entry((r.video.clone(), r.shot)).or_default().push(r);
    }
    let mut picked = Vec::new();
    for frames in shots.values_mut() {
        frames.sort_by_key(|r| r.frame_index);
        picked.extend(sample_shot_frames(frames.len()).into_iter().map(|i| frames[i]));
    }
    picked
        .par_iter()
        .map(|r| {
            let keep = *keep
                .get(&r.frame_id())
                .ok_or_else(|| Error::format("prune report", format!("no decision for {}", r.frame_id())))?;
            Ok(FrameSource {
                video: r.video.clone(),
                shot: r.shot,
                frame: r.frame_index,
                image: pnm::load(&r.frame_file)?,
                prob: pnm::load_prob(seg_dir.join(&r.prob_file))?,
                keep,
            })
        })
        .collect()
}

/// Frame sources from frames plus external masks: every frame, all kept.
fn mask_sources(frames_root: &Path, masks_root: &Path) -> Result<Vec<FrameSource>> {
    let mut sources = Vec::new();
    for video in list_videos(frames_root, "ppm")? {
        let masks_dir = if masks_root.join(&video.name).is_dir() { masks_root.join(&video.name) } else { masks_root.to_path_buf() };
        let loaded: Vec<FrameSource> = video
            .files
            .par_iter()
            .enumerate()
            .map(|(t, path)| {
                let mask = pnm::load_mask(masks_dir.join(format!("{}.pgm", file_stem(path))))?;
                Ok(FrameSource {
                    video: video.name.clone(),
                    shot: 0,
                    frame: t,
                    image: pnm::load(path)?,
                    prob: ProbMap::from_mask(&mask),
                    keep: true,
                })
            })
            .collect::<Result<_>>()?;
        sources.extend(loaded);
    }
    Ok(sources)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn dataset(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let (input, out) = (required(&io.input, "--in")?, required(&io.out, "--out")?);
    let sources = match &io.masks {
        Some(masks) => mask_sources(input, masks)?,
        None => segmentation_sources(cfg, input, io.prune.as_deref())?,
    };
    let params = cfg.dataset_params();
    let entries = build_dataset(&sources, &params, cfg.seed, out)?;
    println!("wrote {} samples to {}", entries.len(), out.display());
    Ok(())
}

pub fn degrade(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let (input, out) = (required(&io.input, "--in")?, required(&io.out, "--out")?);
    let degradation = cfg.degrade.degradation();
    for video in list_videos(input, "pgm")? {
        let dir = out.join(&video.name);
        create_dir(&dir)?;
        video.files.par_iter().enumerate().try_for_each(|(t, path)| {
            let mask = pnm::load_mask(path)?;
            let degraded = degradation.apply(&mask, sample_seed(cfg.seed, &video.name, t))?;
            pnm::save_mask(&degraded, dir.join(format!("{}.pgm", file_stem(path))))
        })?;
    }
    Ok(())
}

pub fn train_cmd(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let (input, out) = (required(&io.input, "--in")?, required(&io.out, "--out")?);
    let (entries, samples) = load_dataset(input)?;
    let samples = if cfg.subsample < 1.0 {
        let chosen = subsample_dataset(&entries, cfg.subsample, cfg.seed)?;
        let ids: std::collections::HashSet<(&str, usize)> = chosen.iter().map(|e| (e.video.as_str(), e.frame)).collect();
        samples.into_iter().filter(|s| ids.contains(&(s.video.as_str(), s.frame))).collect()
    } else {
        samples
    };
    let channels = samples.first().map_or(3, |s| s.image.channels());
    let net = SegNet::new(cfg.arch.clone(), cfg.dataset.w, channels, cfg.dataset.s, cfg.seed)?;
    let (net, report) = train(&net, &samples, &cfg.train_config())?;
    create_dir(out)?;
    save_checkpoint(&net, out.join("model.ckpt"))?;
    let mut text = String::from("epoch\tloss\tpositives\tnegatives\n");
    for (e, loss) in report.epoch_loss.iter().enumerate() {
        text.push_str(&format!("{}\t{:.6}\t{}\t{}\n", e + 1, loss, report.positives[e], report.negatives[e]));
    }
    write_text(&out.join("loss.tsv"), &text)?;
    println!(
        "trained on {} samples, final epoch loss {:.4}",
        samples.len(),
        report.epoch_loss.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

/// Crop box around the ground-truth object, no jitter, with the training
/// context padding.
fn eval_box(cfg: &PipelineConfig, gt: &ProbMap) -> Result<moveseg_core::BBox> {
    let jitter = JitterParams { context_pad: cfg.dataset.jitter.context_pad, ..JitterParams::identity() };
    jittered_box(gt, &jitter)
}

pub fn eval(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let input = required(&io.input, "--in")?;
    let (masks, out) = (required(&io.masks, "--masks")?, required(&io.out, "--out")?);
    let net = load_checkpoint(required(&io.model, "--model")?)?;
    let baseline: Option<HashMap<String, PathBuf>> = match &io.baseline {
        Some(dir) => Some(
            read_segment_manifest(dir.join("manifest.tsv"))?
                .into_iter()
                .map(|r| (r.frame_id(), dir.join(&r.prob_file)))
                .collect(),
        ),
        None => None,
    };
    let sources = mask_sources(input, masks)?;
    let s = net.output_side();
    let scored: Vec<Option<(String, _, Option<_>)>> = sources
        .par_iter()
        .map(|f| {
            let id = format!("{}:{}", f.video, frame_name(f.frame));
            let bbox = match eval_box(cfg, &f.prob) {
                Ok(b) => b,
                Err(Error::EmptyMask) => {
                    log::warn!("{id}: empty ground truth, skipped");
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let gt = crop_prob(&f.prob, bbox, s, s)?.binarize(0.5);
            let crop = crop_bilinear(&f.image, bbox, net.input_side(), net.input_side())?;
            let model = score_item(&infer_mask(&net, &crop, cfg.eval_threshold)?, &gt)?;
            let base = match &baseline {
                Some(map) => {
                    let path = map
                        .get(&id)
                        .ok_or_else(|| Error::format("segment manifest", format!("no baseline map for {id}")))?;
                    let prob = crop_prob(&pnm::load_prob(path)?, bbox, s, s)?;
                    Some(score_item(&prob.binarize(cfg.eval_threshold), &gt)?)
                }
                None => None,
            };
            Ok(Some((id, model, base)))
        })
        .collect::<Result<_>>()?;
    let scored: Vec<_> = scored.into_iter().flatten().collect();
    let names: Vec<String> = scored.iter().map(|(n, _, _)| n.clone()).collect();
    let model = SegScore::from_items(scored.iter().map(|(_, m, _)| *m).collect());
    create_dir(out)?;
    write_text(&out.join("scores.tsv"), &format_score_report(&names, &model)?)?;
    println!("model mean iou {:.4} over {} frames", model.mean_iou, names.len());
    if baseline.is_some() {
        let base = SegScore::from_items(scored.iter().filter_map(|(_, _, b)| *b).collect());
        write_text(&out.join("baseline_scores.tsv"), &format_score_report(&names, &base)?)?;
        println!("baseline mean iou {:.4}", base.mean_iou);
    }
    Ok(())
}

/// Nearest-neighbour upsampling of an `s x s` map to `width x height`.
fn upsample_nearest(prob: &ProbMap, width: usize, height: usize) -> Result<ProbMap> {
    let (sw, sh) = (prob.width(), prob.height());
    let data = (0..width * height)
        .map(|i| prob.get((i % width) * sw / width, (i / width) * sh / height))
        .collect();
    ProbMap::new(width, height, data)
}

pub fn infer(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let (input, out) = (required(&io.input, "--in")?, required(&io.out, "--out")?);
    let net = load_checkpoint(required(&io.model, "--model")?)?;
    for video in list_videos(input, "ppm")? {
        let dir = out.join(&video.name);
        create_dir(&dir)?;
        video.files.par_iter().try_for_each(|path| {
            let frame = pnm::load(path)?;
            let small = resize_bilinear(&frame, net.input_side(), net.input_side())?;
            let prob = upsample_nearest(&net.forward(&small)?, frame.width(), frame.height())?;
            pnm::save_mask(&prob.binarize(cfg.eval_threshold), dir.join(format!("{}.pgm", file_stem(path))))
        })?;
    }
    Ok(())
}

pub fn overlay_cmd(cfg: &PipelineConfig, io: &Inputs) -> Result<()> {
    let image = pnm::load(required(&io.image, "--image")?)?;
    let mask: BinaryMask = pnm::load_prob(required(&io.mask, "--mask")?)?.binarize(cfg.eval_threshold);
    let out = required(&io.out, "--out")?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    pnm::save(&overlay(&image, &mask)?, out)
}

pub fn defaults() -> Result<()> {
    print!("{}", PipelineConfig::default().to_text());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_upsampling_repeats_cells() {
        let p = ProbMap::new(2, 2, vec![0.0, 1.0, 0.25, 0.5]).unwrap();
        let up = upsample_nearest(&p, 4, 4).unwrap();
        assert_eq!(up.get(0, 0), 0.0);
        assert_eq!(up.get(1, 1), 0.0);
        assert_eq!(up.get(3, 0), 1.0);
        assert_eq!(up.get(0, 3), 0.25);
        assert_eq!(up.get(2, 2), 0.5);
    }

    #[test]
    fn missing_flag_is_a_validation_error() {
        match flow(&PipelineConfig::default(), &Inputs::default()) {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "--in"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
