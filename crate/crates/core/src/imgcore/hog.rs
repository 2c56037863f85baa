//! Histogram-of-oriented-gradients descriptor over a rectangular region.
//!
//! The region is split into a `cells x cells` grid; each cell accumulates
//! gradient magnitude into unsigned orientation bins over `[0, pi)`. Cells are
//! grouped into 2x2 blocks with stride one, and each block is L2-normalized
//! with `v / sqrt(|v|^2 + eps^2)`.

use std::f64::consts::PI;

use super::raster::{BBox, RasterU8};
use crate::error::{Error, Result};

pub const HOG_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HogParams {
    pub cells: usize,
    pub orientations: usize,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cells: 4,
            orientations: 9,
        }
    }
}

impl HogParams {
    fn block_side(&self) -> usize {
        self.cells.min(2)
    }

    /// Length of the descriptor produced with these parameters.
    pub fn descriptor_len(&self) -> usize {
        let b = self.block_side();
        let blocks = self.cells + 1 - b;
        blocks * blocks * b * b * self.orientations
    }
}

pub fn hog_descriptor(gray: &RasterU8, region: BBox, params: HogParams) -> Result<Vec<f64>> {
    if params.cells == 0 || params.orientations == 0 {
        return Err(Error::invalid("hog", "cells and orientations must be >= 1"));
    }
    if !region.fits_in(gray.width(), gray.height()) {
        return Err(Error::DegenerateRegion(format!(
            "{region:?} does not fit in {}x{}",
            gray.width(),
            gray.height()
        )));
    }
    if region.w < params.cells || region.h < params.cells {
        return Err(Error::DegenerateRegion(format!(
            "{}x{} region is smaller than the {}x{} cell grid",
            region.w, region.h, params.cells, params.cells
        )));
    }
    let gray = gray.to_gray();
    let (w, h) = (gray.width(), gray.height());
    let at = |x: usize, y: usize| gray.get(x, y, 0) as f64;

    let cells = params.cells;
    let bins = params.orientations;
    let mut hist = vec![0.0; cells * cells * bins];
    for y in region.y..region.bottom() {
        let cy = (y - region.y) * cells / region.h;
        for x in region.x..region.right() {
            let cx = (x - region.x) * cells / region.w;
            // central differences, clamped at the image border
            let gx = at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y);
            let gy = at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1));
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += PI;
            }
            if angle >= PI {
                angle -= PI;
            }
            let bin = ((angle / PI * bins as f64) as usize).min(bins - 1);
            hist[(cy * cells + cx) * bins + bin] += mag;
        }
    }

    let b = params.block_side();
    let blocks = cells + 1 - b;
    let mut out = Vec::with_capacity(params.descriptor_len());
    let mut block = Vec::with_capacity(b * b * bins);
    for by in 0..blocks {
        for bx in 0..blocks {
            block.clear();
            for cy in by..by + b {
                for cx in bx..bx + b {
                    let start = (cy * cells + cx) * bins;
                    block.extend_from_slice(&hist[start..start + bins]);
                }
            }
            let norm = (block.iter().map(|v| v * v).sum::<f64>() + HOG_EPSILON * HOG_EPSILON).sqrt();
            out.extend(block.iter().map(|v| v / norm));
        }
    }
    Ok(out)
}
