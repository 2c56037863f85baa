use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::imgcore::ProbMap;
use crate::optflow::{dominant_direction, flow_magnitude, FlowField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaliencyParams {
    /// Minimum displacement (px/frame) for a pixel to count as moving.
    pub static_motion_threshold: f64,
    /// A frame is mostly static when fewer than this fraction of pixels move.
    pub static_frame_fraction: f64,
    pub angle_bins: usize,
}

impl Default for SaliencyParams {
    fn default() -> Self {
        SaliencyParams {
            static_motion_threshold: 0.5,
            static_frame_fraction: 0.5,
            angle_bins: 16,
        }
    }
}

impl SaliencyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.static_motion_threshold > 0.0 && self.static_motion_threshold.is_finite()) {
            return Err(Error::invalid("saliency.static_motion_threshold", "must be > 0"));
        }
        if !(self.static_frame_fraction > 0.0 && self.static_frame_fraction < 1.0) {
            return Err(Error::invalid("saliency.static_frame_fraction", "must be in (0, 1)"));
        }
        if self.angle_bins < 4 {
            return Err(Error::invalid("saliency.angle_bins", "must be >= 4"));
        }
        Ok(())
    }
}

/// Nearest-rank percentile of unsorted values.
fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Per-pixel motion saliency in `[0, 1]`.
///
/// In a mostly static frame saliency is the flow magnitude normalized by its
/// 99th percentile (never by less than the motion threshold). Otherwise it is
/// the angular deviation of each moving pixel from the dominant direction,
/// divided by pi; pixels below the motion threshold get zero.
pub fn motion_saliency(flow: &FlowField, params: &SaliencyParams) -> Result<ProbMap> {
    params.validate()?;
    let mag = flow_magnitude(flow);
    let mag = mag.data();
    let moving = mag.iter().filter(|&&m| m >= params.static_motion_threshold).count();
    let fraction = moving as f64 / mag.len() as f64;
    let data: Vec<f64> = if fraction < params.static_frame_fraction {
        let norm = percentile(mag, 0.99).max(params.static_motion_threshold);
        mag.iter().map(|m| m / norm).collect()
    } else {
        let (dominant, _) = dominant_direction(flow, params.static_motion_threshold, params.angle_bins)?;
        flow.u()
            .iter()
            .zip(flow.v())
            .zip(mag)
            .map(|((&u, &v), &m)| {
                if m < params.static_motion_threshold {
                    return 0.0;
                }
                let diff = (v.atan2(u) - dominant).rem_euclid(2.0 * PI);
                diff.min(2.0 * PI - diff) / PI
            })
            .collect()
    };
    ProbMap::from_clamped(flow.width(), flow.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_flow(w: usize, h: usize, bg: (f64, f64), block: (f64, f64), inside: impl Fn(usize, usize) -> bool) -> FlowField {
        let mut u = Vec::new();
        let mut v = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let (a, b) = if inside(x, y) { block } else { bg };
                u.push(a);
                v.push(b);
            }
        }
        FlowField::new(w, h, u, v).unwrap()
    }

    #[test]
    fn zero_flow_is_not_salient() {
        let f = FlowField::constant(9, 7, 0.0, 0.0).unwrap();
        let s = motion_saliency(&f, &SaliencyParams::default()).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn moving_block_in_static_frame() {
        let inside = |x: usize, y: usize| (10..20).contains(&x) && (10..20).contains(&y);
        let f = block_flow(40, 40, (0.0, 0.0), (4.0, 0.0), inside);
        let p = SaliencyParams::default();
        let s = motion_saliency(&f, &p).unwrap();
        // oracle: thresholded magnitude
        for y in 0..40 {
            for x in 0..40 {
                let expected = if inside(x, y) { 1.0 } else { 0.0 };
                assert!((s.get(x, y) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deviating_block_in_moving_frame() {
        let inside = |x: usize, y: usize| (4..8).contains(&x) && (4..8).contains(&y);
        let f = block_flow(20, 20, (1.0, 0.0), (0.0, 1.0), inside);
        let s = motion_saliency(&f, &SaliencyParams::default()).unwrap();
        for y in 0..20 {
            for x in 0..20 {
                // pi/2 deviation divided by pi
                let expected = if inside(x, y) { 0.5 } else { 0.0 };
                assert!((s.get(x, y) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn static_branch_does_not_amplify_jitter() {
        let u: Vec<f64> = (0..100).map(|i| 0.01 * (i % 7) as f64).collect();
        let f = FlowField::new(10, 10, u, vec![0.0; 100]).unwrap();
        let s = motion_saliency(&f, &SaliencyParams::default()).unwrap();
        assert!(s.data().iter().all(|&v| v <= 0.12 + 1e-12));
    }

    #[test]
    fn opposite_motion_is_maximally_salient() {
        let inside = |x: usize, _y: usize| x < 2;
        let f = block_flow(10, 2, (2.0, 0.0), (-2.0, 0.0), inside);
        let s = motion_saliency(&f, &SaliencyParams::default()).unwrap();
        assert!((s.get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(s.get(5, 1), 0.0);
    }

    #[test]
    fn invalid_params_error() {
        let f = FlowField::constant(2, 2, 0.0, 0.0).unwrap();
        let bad = SaliencyParams { static_frame_fraction: 1.0, ..SaliencyParams::default() };
        assert!(motion_saliency(&f, &bad).is_err());
        let bad = SaliencyParams { static_motion_threshold: 0.0, ..SaliencyParams::default() };
        assert!(motion_saliency(&f, &bad).is_err());
    }
}
