use crate::error::{Error, Result};
use crate::imgcore::{color_histogram, ensure_same_size, hog_descriptor, BBox, HogParams, RasterU8};
use crate::superpixel::SuperpixelLabeling;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureParams {
    pub hist_bins: usize,
    pub hog: HogParams,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            hist_bins: 16,
            hog: HogParams::default(),
        }
    }
}

/// Location and appearance of one superpixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelFeature {
    /// Region centroid divided by the frame size.
    pub centroid: (f64, f64),
    pub color_hist: Vec<f64>,
    pub hog: Vec<f64>,
    pub frame_index: usize,
}

/// Grows `b` symmetrically to at least `min_side` per axis, clamped to the frame.
fn grow_to(b: BBox, min_side: usize, width: usize, height: usize) -> BBox {
    let grow = |start: usize, len: usize, extent: usize| -> (usize, usize) {
        if len >= min_side || extent < min_side {
            return (start, len);
        }
        let extra = min_side - len;
        let lo = start.saturating_sub(extra / 2).min(extent - min_side);
        (lo, min_side)
    };
    let (x, w) = grow(b.x, b.w, width);
    let (y, h) = grow(b.y, b.h, height);
    BBox::new(x, y, w, h)
}

pub fn superpixel_features(
    raster: &RasterU8,
    labeling: &SuperpixelLabeling,
    frame_index: usize,
    params: &FeatureParams,
) -> Result<Vec<SuperpixelFeature>> {
    ensure_same_size(raster, labeling, "superpixel features")?;
    let (w, h) = (raster.width(), raster.height());
    if w < params.hog.cells || h < params.hog.cells {
        return Err(Error::DegenerateRegion(format!(
            "{w}x{h} frame is smaller than the {0}x{0} cell grid",
            params.hog.cells
        )));
    }
    let gray = raster.to_gray();
    labeling
        .region_pixels()
        .iter()
        .zip(labeling.centroids())
        .map(|(pixels, &(cx, cy))| {
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            for &i in pixels {
                let (x, y) = (i % w, i / w);
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
            let bbox = grow_to(BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1), params.hog.cells, w, h);
            Ok(SuperpixelFeature {
                centroid: (cx / w as f64, cy / h as f64),
                color_hist: color_histogram(raster, pixels, params.hist_bins)?,
                hog: hog_descriptor(&gray, bbox, params.hog)?,
                frame_index,
            })
        })
        .collect()
}
