//! Appearance-based shot splitting and rejection of badly segmented frames.

use std::fmt;

use crate::error::{Error, Result};
use crate::imgcore::{chi_squared, frame_histogram, ProbMap, RasterU8};

/// Inclusive frame range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Shot {
    pub start: usize,
    pub end: usize,
}

impl Shot {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotParams {
    pub hist_bins: usize,
    pub cut_threshold: f64,
}

impl Default for ShotParams {
    fn default() -> Self {
        ShotParams {
            hist_bins: 16,
            cut_threshold: 0.3,
        }
    }
}

impl ShotParams {
    pub fn validate(&self) -> Result<()> {
        if self.hist_bins == 0 || self.hist_bins > 256 {
            return Err(Error::invalid("shots.hist_bins", "must be in 1..=256"));
        }
        if !(self.cut_threshold >= 0.0 && self.cut_threshold.is_finite()) {
            return Err(Error::invalid("shots.cut_threshold", "must be >= 0"));
        }
        Ok(())
    }
}

/// χ² distance between the color histograms of two frames, divided by the
/// channel count so that it lies in `[0, 1]`.
pub fn frame_distance(a: &RasterU8, b: &RasterU8, hist_bins: usize) -> Result<f64> {
    let ha = frame_histogram(a, hist_bins)?;
    let hb = frame_histogram(b, hist_bins)?;
    if ha.len() != hb.len() {
        return Err(Error::DimensionMismatch("frames differ in channel count".into()));
    }
    Ok(chi_squared(&ha, &hb) / a.channels() as f64)
}

/// Cuts between frames `t` and `t + 1` whenever their histogram distance
/// exceeds the threshold; returns the maximal uncut runs.
pub fn detect_shots(frames: &[RasterU8], params: &ShotParams) -> Result<Vec<Shot>> {
    params.validate()?;
    if frames.is_empty() {
        return Err(Error::invalid("frames", "need at least one frame"));
    }
    let mut shots = Vec::new();
    let mut start = 0;
    for t in 0..frames.len() - 1 {
        if frame_distance(&frames[t], &frames[t + 1], params.hist_bins)? > params.cut_threshold {
            shots.push(Shot { start, end: t });
            start = t + 1;
        }
    }
    shots.push(Shot {
        start,
        end: frames.len() - 1,
    });
    Ok(shots)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneParams {
    pub max_fg_fraction: f64,
    pub min_fg_fraction: f64,
    pub border_band_fraction: f64,
    pub max_border_fg_fraction: f64,
    pub binarize_threshold: f64,
}

impl Default for PruneParams {
    fn default() -> Self {
        PruneParams {
            max_fg_fraction: 0.8,
            min_fg_fraction: 0.1,
            border_band_fraction: 0.05,
            max_border_fg_fraction: 0.1,
            binarize_threshold: 0.5,
        }
    }
}

impl PruneParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("prune.max_fg_fraction", self.max_fg_fraction),
            ("prune.min_fg_fraction", self.min_fg_fraction),
            ("prune.border_band_fraction", self.border_band_fraction),
            ("prune.max_border_fg_fraction", self.max_border_fg_fraction),
            ("prune.binarize_threshold", self.binarize_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(name, format!("must be in (0, 1), got {v}")));
            }
        }
        if self.min_fg_fraction >= self.max_fg_fraction {
            return Err(Error::invalid(
                "prune.min_fg_fraction",
                "must be below prune.max_fg_fraction",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PruneReason {
    Ok,
    TooMuchFg,
    TooLittleFg,
    BorderFg,
}

impl PruneReason {
    pub fn as_str(self) -> &'static str {
        match self {
            PruneReason::Ok => "ok",
            PruneReason::TooMuchFg => "too_much_fg",
            PruneReason::TooLittleFg => "too_little_fg",
            PruneReason::BorderFg => "border_fg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => PruneReason::Ok,
            "too_much_fg" => PruneReason::TooMuchFg,
            "too_little_fg" => PruneReason::TooLittleFg,
            "border_fg" => PruneReason::BorderFg,
            _ => return None,
        })
    }
}

impl fmt::Display for PruneReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Width in pixels of the band along each edge checked by the border rule.
pub fn border_band(width: usize, height: usize, fraction: f64) -> usize {
    ((fraction * width.min(height) as f64).round() as usize).max(1)
}

/// Returns whether to keep the frame and the first rule it fails.
pub fn prune_frame(prob: &ProbMap, params: &PruneParams) -> (bool, PruneReason) {
    let mask = prob.binarize(params.binarize_threshold);
    let fg = mask.fraction();
    if fg > params.max_fg_fraction {
        return (false, PruneReason::TooMuchFg);
    }
    if fg < params.min_fg_fraction {
        return (false, PruneReason::TooLittleFg);
    }
    let (w, h) = (mask.width(), mask.height());
    let b = border_band(w, h, params.border_band_fraction);
    let (mut band, mut band_fg) = (0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            if x < b || y < b || x + b >= w || y + b >= h {
                band += 1;
                band_fg += mask.get(x, y) as usize;
            }
        }
    }
    if band_fg as f64 / band as f64 > params.max_border_fg_fraction {
        return (false, PruneReason::BorderFg);
    }
    (true, PruneReason::Ok)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneDecision {
    pub frame_id: String,
    pub keep: bool,
    pub reason: PruneReason,
}

/// One `<frame-id> <keep|discard> <reason>` line per decision.
pub fn format_prune_report(decisions: &[PruneDecision]) -> String {
    decisions
        .iter()
        .map(|d| {
            format!(
                "{} {} {}\n",
                d.frame_id,
                if d.keep { "keep" } else { "discard" },
                d.reason
            )
        })
        .collect()
}

pub fn parse_prune_report(text: &str) -> Result<Vec<PruneDecision>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::format("prune report", format!("bad line {line:?}"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let keep = match parts[1] {
                "keep" => true,
                "discard" => false,
                _ => return Err(bad()),
            };
            Ok(PruneDecision {
                frame_id: parts[0].to_string(),
                keep,
                reason: PruneReason::parse(parts[2]).ok_or_else(bad)?,
            })
        })
        .collect()
}

/// Frame indices (relative to the shot start) sampled at a uniform stride so
/// that a shot yields between 5 and 10 frames when it is long enough.
pub fn sample_shot_frames(len: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    // ceil(len / ceil(len / 10)) >= 5 whenever len >= 5, so no clamp is needed
    let stride = len.div_ceil(10);
    (0..len).step_by(stride).take(10).collect()
}
