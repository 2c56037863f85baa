use crate::error::{Error, Result};

/// Row-major 8-bit image with one (gray) or three (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterU8 {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterU8 {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if channels != 1 && channels != 3 {
            return Err(Error::invalid("channels", format!("expected 1 or 3, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{}x{}x{} raster needs {} samples, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(RasterU8 {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: u8) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Samples of the pixel at flat index `i`.
    #[inline]
    pub fn pixel(&self, i: usize) -> &[u8] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    /// Rec. 601 luma; gray rasters are returned unchanged.
    pub fn to_gray(&self) -> RasterU8 {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect();
        RasterU8 {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Replicates a gray raster into three channels.
    pub fn to_rgb(&self) -> RasterU8 {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        RasterU8 {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    pub fn same_size<T: Sized2d>(&self, other: &T) -> bool {
        self.width == other.width() && self.height == other.height()
    }
}

#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Anything with a pixel grid.
pub trait Sized2d {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
}

macro_rules! impl_sized {
    ($($t:ty),*) => {$(
        impl Sized2d for $t {
            fn width(&self) -> usize { self.width }
            fn height(&self) -> usize { self.height }
        }
    )*};
}
impl_sized!(RasterU8, FloatRaster, ProbMap, BinaryMask);

pub(crate) fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(
            "dimensions",
            format!("width and height must be >= 1, got {width}x{height}"),
        ));
    }
    Ok(())
}

pub(crate) fn ensure_same_size(a: &impl Sized2d, b: &impl Sized2d, what: &str) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Unbounded real-valued raster (flow magnitudes, arbitrary per-pixel values).
#[derive(Debug, Clone, PartialEq)]
pub struct FloatRaster {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) data: Vec<f64>,
}

impl FloatRaster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} raster needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(FloatRaster {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Per-pixel probabilities; every value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} map needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid("probability", format!("{bad} outside [0, 1]")));
        }
        Ok(ProbMap {
            width,
            height,
            data,
        })
    }

    /// Builds a map from arbitrary reals, clamping into `[0, 1]` (NaN becomes 0).
    pub fn from_clamped(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let data = data
            .into_iter()
            .map(|p| if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) })
            .collect();
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        ProbMap {
            width: mask.width,
            height: mask.height,
            data: mask.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Foreground where the probability is strictly above `threshold`.
    pub fn binarize(&self, threshold: f64) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&p| p > threshold).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} mask needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.data.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// True when every foreground pixel of `self` is also foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| !b).collect(),
        }
    }
}

/// Axis-aligned box; `x`, `y` is the inclusive top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BBox {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        BBox { x, y, w, h }
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.right() <= width && self.bottom() <= height
    }
}

/// Smallest box containing every foreground pixel.
pub fn tight_bbox(mask: &BinaryMask) -> Result<BBox> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..mask.height {
        let row = &mask.data[y * mask.width..(y + 1) * mask.width];
        for (x, _) in row.iter().enumerate().filter(|(_, &b)| b) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if x0 == usize::MAX {
        return Err(Error::EmptyMask);
    }
    Ok(BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_of_single_pixel() {
        let mask = BinaryMask::from_fn(10, 10, |x, y| (x, y) == (3, 4)).unwrap();
        assert_eq!(tight_bbox(&mask).unwrap(), BBox::new(3, 4, 1, 1));
    }

    #[test]
    fn bbox_of_full_mask() {
        let mask = BinaryMask::full(10, 10).unwrap();
        assert_eq!(tight_bbox(&mask).unwrap(), BBox::new(0, 0, 10, 10));
    }

    #[test]
    fn bbox_of_two_pixels() {
        let pts = [(1, 1), (4, 2)];
        let mask = BinaryMask::from_fn(8, 8, |x, y| pts.contains(&(x, y))).unwrap();
        // min/max over the true coordinates
        let x0 = pts.iter().map(|p| p.0).min().unwrap();
        let x1 = pts.iter().map(|p| p.0).max().unwrap();
        let y0 = pts.iter().map(|p| p.1).min().unwrap();
        let y1 = pts.iter().map(|p| p.1).max().unwrap();
        let expected = BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
        assert_eq!(expected, BBox::new(1, 1, 4, 2));
        assert_eq!(tight_bbox(&mask).unwrap(), expected);
    }

    #[test]
    fn bbox_of_empty_mask_errors() {
        let mask = BinaryMask::empty(4, 4).unwrap();
        assert!(matches!(tight_bbox(&mask), Err(Error::EmptyMask)));
    }

    #[test]
    fn prob_map_rejects_out_of_range() {
        assert!(ProbMap::new(2, 1, vec![0.5, 1.5]).is_err());
        assert!(ProbMap::new(2, 1, vec![0.5, f64::NAN]).is_err());
        let p = ProbMap::from_clamped(2, 1, vec![-1.0, 2.0]).unwrap();
        assert_eq!(p.data(), &[0.0, 1.0]);
    }

    #[test]
    fn raster_rejects_bad_shapes() {
        assert!(RasterU8::new(0, 4, 1, vec![]).is_err());
        assert!(RasterU8::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(RasterU8::new(2, 2, 3, vec![0; 11]).is_err());
    }
}
