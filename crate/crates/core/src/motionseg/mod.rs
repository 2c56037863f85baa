//! Unsupervised motion segmentation of a shot.
//!
//! Each frame gets a motion saliency map from its optical flow, which is
//! averaged over SLIC superpixels. Superpixels of every frame in the shot are
//! pooled into one nearest-neighbor graph over location and appearance (color
//! histogram and HOG), and saliency is propagated along that graph so that
//! evidence from frames where the object moves carries over to frames where it
//! does not. The propagated value of each superpixel is painted back onto its
//! pixels as the foreground probability.

mod features;
mod graph;
mod saliency;

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imgcore::{ensure_same_size, FloatRaster, ProbMap, RasterU8};
use crate::optflow::{dense_flow, FlowField, FlowParams};
use crate::superpixel::{region_means, slic, SlicParams};

pub use features::{superpixel_features, FeatureParams, SuperpixelFeature};
pub use graph::{build_nn_graph, propagate_saliency, GraphWeights, NNGraph};
pub use saliency::{motion_saliency, SaliencyParams};

#[derive(Debug, Clone, PartialEq)]
pub struct UnlcConfig {
    pub slic: SlicParams,
    pub saliency: SaliencyParams,
    pub features: FeatureParams,
    pub k: usize,
    pub weights: GraphWeights,
    pub iterations: usize,
    pub damping: f64,
}

impl Default for UnlcConfig {
    fn default() -> Self {
        UnlcConfig {
            slic: SlicParams::default(),
            saliency: SaliencyParams::default(),
            features: FeatureParams::default(),
            k: 8,
            weights: GraphWeights::default(),
            iterations: 10,
            damping: 0.5,
        }
    }
}

/// Foreground probability for every frame of a shot.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSegmentation {
    pub frames: Vec<ProbMap>,
}

/// Forward flow for each consecutive frame pair.
pub fn compute_flows(frames: &[RasterU8], params: &FlowParams) -> Result<Vec<FlowField>> {
    (0..frames.len().saturating_sub(1))
        .into_par_iter()
        .map(|t| dense_flow(&frames[t].to_gray(), &frames[t + 1].to_gray(), params))
        .collect()
}

pub fn unlc_segment(frames: &[RasterU8], flows: &[FlowField], config: &UnlcConfig) -> Result<ShotSegmentation> {
    if frames.len() < 2 {
        return Err(Error::invalid("frames", format!("a shot needs at least 2 frames, got {}", frames.len())));
    }
    if flows.len() != frames.len() - 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} frames need {} flows, got {}",
            frames.len(),
            frames.len() - 1,
            flows.len()
        )));
    }
    for (t, f) in frames.iter().enumerate() {
        ensure_same_size(&frames[0], f, &format!("frame {t}"))?;
    }
    for (t, f) in flows.iter().enumerate() {
        ensure_same_size(&frames[0], f, &format!("flow {t}"))?;
    }
    config.saliency.validate()?;

    // the last frame has no forward flow and reuses the previous pair's
    let per_frame: Vec<_> = frames
        .par_iter()
        .enumerate()
        .map(|(t, frame)| {
            let labeling = slic(frame, &config.slic)?;
            let saliency = motion_saliency(&flows[t.min(flows.len() - 1)], &config.saliency)?;
            let initial = region_means(&labeling, &FloatRaster::from(&saliency))?;
            let feats = superpixel_features(frame, &labeling, t, &config.features)?;
            Ok((labeling, initial, feats))
        })
        .collect::<Result<_>>()?;

    let mut pooled = Vec::new();
    let mut initial = Vec::new();
    let mut offsets = Vec::with_capacity(per_frame.len());
    for (_, init, feats) in &per_frame {
        offsets.push(initial.len());
        initial.extend(init.iter().map(|v| v.clamp(0.0, 1.0)));
        pooled.extend(feats.iter().cloned());
    }
    let graph = build_nn_graph(&pooled, config.k, config.weights)?;
    let votes = propagate_saliency(&graph, &initial, config.iterations, config.damping)?;

    let frames = per_frame
        .iter()
        .zip(&offsets)
        .map(|((labeling, _, _), &off)| {
            let data = labeling.labels().iter().map(|&l| votes[off + l as usize]).collect();
            ProbMap::new(labeling.width(), labeling.height(), data)
        })
        .collect::<Result<_>>()?;
    Ok(ShotSegmentation { frames })
}

/// One line of a shot manifest: where the probability map and its source
/// frame live, and which video/shot/frame it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SegmentRecord {
    pub video: String,
    pub frame_index: usize,
    pub shot: usize,
    pub prob_file: String,
    pub frame_file: String,
}

impl SegmentRecord {
    pub fn frame_id(&self) -> String {
        format!("{}:{:05}", self.video, self.frame_index)
    }
}

/// Tab-separated `prob_file frame_file video frame_index shot`, one per line.
pub fn write_segment_manifest(path: impl AsRef<Path>, records: &[SegmentRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut sorted = records.to_vec();
    sorted.sort();
    let text: String = sorted
        .iter()
        .map(|r| format!("{}\t{}\t{}\t{}\t{}\n", r.prob_file, r.frame_file, r.video, r.frame_index, r.shot))
        .collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_segment_manifest(path: impl AsRef<Path>) -> Result<Vec<SegmentRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(Error::format("segment manifest", format!("expected 5 fields: {line:?}")));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| Error::format("segment manifest", format!("bad number {s:?}")));
            Ok(SegmentRecord {
                prob_file: f[0].to_string(),
                frame_file: f[1].to_string(),
                video: f[2].to_string(),
                frame_index: num(f[3])?,
                shot: num(f[4])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
