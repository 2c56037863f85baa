//! Training samples from (frame, foreground probability) pairs: jittered
//! object-centered crops, trimap targets, and the two label degradations
//! (boundary erode/dilate and side truncation).

mod store;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imgcore::{
    crop_bilinear, crop_prob, dilate, downsample_mask, downsample_prob, erode, tight_bbox, BBox,
    BinaryMask, ProbMap, RasterU8,
};

pub use store::{
    build_dataset, load_dataset, load_sample, read_manifest, sample_id, sample_seed,
    subsample_dataset, write_manifest, FrameSource, ManifestEntry,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterParams {
    pub scale_range: (f64, f64),
    /// Maximum offset of the box center as a fraction of the box size.
    pub translate_range: f64,
    /// Context added on each side as a fraction of the object box size.
    pub context_pad: f64,
    pub rng_seed: u64,
    /// Probability above which a pixel belongs to the object whose box is cropped.
    pub object_threshold: f64,
}

impl Default for JitterParams {
    fn default() -> Self {
        JitterParams {
            scale_range: (0.8, 1.25),
            translate_range: 0.15,
            context_pad: 0.25,
            rng_seed: 0,
            object_threshold: 0.7,
        }
    }
}

impl JitterParams {
    /// No jitter and no context: the crop is the object's tight box.
    pub fn identity() -> Self {
        JitterParams {
            scale_range: (1.0, 1.0),
            translate_range: 0.0,
            context_pad: 0.0,
            ..JitterParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid("jitter.scale_range", format!("need 0 < min <= max, got ({lo}, {hi})")));
        }
        if !(self.translate_range >= 0.0 && self.translate_range.is_finite()) {
            return Err(Error::invalid("jitter.translate_range", "must be >= 0"));
        }
        if !(self.context_pad >= 0.0 && self.context_pad.is_finite()) {
            return Err(Error::invalid("jitter.context_pad", "must be >= 0"));
        }
        if !(self.object_threshold >= 0.0 && self.object_threshold < 1.0) {
            return Err(Error::invalid("jitter.object_threshold", "must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Integer crop box for the object in `prob`, after padding, scaling and
/// translation, clamped into the image. The box keeps the aspect ratio of the
/// padded object box; a box larger than the image in one dimension is shrunk
/// to the image in that dimension.
pub fn jittered_box(prob: &ProbMap, jitter: &JitterParams) -> Result<BBox> {
    jitter.validate()?;
    let object = tight_bbox(&prob.binarize(jitter.object_threshold))?;
    let mut rng = ChaCha8Rng::seed_from_u64(jitter.rng_seed);
    let (lo, hi) = jitter.scale_range;
    let scale = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let t = jitter.translate_range;
    let (tx, ty) = if t > 0.0 {
        (rng.gen_range(-t..=t), rng.gen_range(-t..=t))
    } else {
        (0.0, 0.0)
    };
    let grow = (1.0 + 2.0 * jitter.context_pad) * scale;
    let bw = object.w as f64 * grow;
    let bh = object.h as f64 * grow;
    let cx = object.x as f64 + object.w as f64 / 2.0 + tx * bw;
    let cy = object.y as f64 + object.h as f64 / 2.0 + ty * bh;
    let place = |center: f64, len: f64, limit: usize| -> (usize, usize) {
        let len = (len.round() as usize).clamp(1, limit);
        let start = (center - len as f64 / 2.0).round().clamp(0.0, (limit - len) as f64) as usize;
        (start, len)
    };
    let (x, w) = place(cx, bw, prob.width());
    let (y, h) = place(cy, bh, prob.height());
    Ok(BBox::new(x, y, w, h))
}

/// Crops image and probability map to the jittered object box and resamples
/// both to `w x w` (bilinear for the image, area average for the map).
pub fn sample_crop(image: &RasterU8, prob: &ProbMap, jitter: &JitterParams, w: usize) -> Result<(RasterU8, ProbMap)> {
    if image.width() != prob.width() || image.height() != prob.height() {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} vs map {}x{}",
            image.width(),
            image.height(),
            prob.width(),
            prob.height()
        )));
    }
    let region = jittered_box(prob, jitter)?;
    Ok((crop_bilinear(image, region, w, w)?, crop_prob(prob, region, w, w)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimapParams {
    pub neg_threshold: f64,
    pub pos_threshold: f64,
}

impl Default for TrimapParams {
    fn default() -> Self {
        TrimapParams {
            neg_threshold: 0.4,
            pos_threshold: 0.7,
        }
    }
}

impl TrimapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.neg_threshold > 0.0 && self.neg_threshold < 1.0) {
            return Err(Error::invalid("trimap.neg_threshold", "must be in (0, 1)"));
        }
        if !(self.pos_threshold > 0.0 && self.pos_threshold < 1.0) {
            return Err(Error::invalid("trimap.pos_threshold", "must be in (0, 1)"));
        }
        if self.neg_threshold >= self.pos_threshold {
            return Err(Error::invalid(
                "trimap.pos_threshold",
                "must be greater than trimap.neg_threshold",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
    DontCare,
}

impl Label {
    /// Gray level used when a trimap is stored as an image.
    pub fn gray(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::DontCare => 128,
            Label::Positive => 255,
        }
    }

    pub fn from_gray(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Negative),
            128 => Some(Label::DontCare),
            255 => Some(Label::Positive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimap {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
    pub dont_care: usize,
}

impl Trimap {
    pub fn new(width: usize, height: usize, labels: Vec<Label>) -> Result<Self> {
        crate::imgcore::check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} trimap needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(Trimap { width, height, labels })
    }

    pub fn filled(width: usize, height: usize, label: Label) -> Result<Self> {
        Self::new(width, height, vec![label; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    pub fn counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for l in &self.labels {
            match l {
                Label::Positive => c.positive += 1,
                Label::Negative => c.negative += 1,
                Label::DontCare => c.dont_care += 1,
            }
        }
        c
    }

    pub fn to_raster(&self) -> RasterU8 {
        let data = self.labels.iter().map(|l| l.gray()).collect();
        RasterU8::new(self.width, self.height, 1, data).expect("trimap dimensions are valid")
    }

    pub fn from_raster(raster: &RasterU8) -> Result<Self> {
        if raster.channels() != 1 {
            return Err(Error::format("trimap", "expected a single-channel image"));
        }
        let labels = raster
            .data()
            .iter()
            .map(|&v| Label::from_gray(v).ok_or_else(|| Error::format("trimap", format!("gray level {v} is not a label"))))
            .collect::<Result<_>>()?;
        Self::new(raster.width(), raster.height(), labels)
    }
}

impl crate::imgcore::Sized2d for Trimap {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

/// `p < neg` is negative, `p > pos` is positive, anything else is don't-care.
pub fn to_trimap(prob: &ProbMap, params: &TrimapParams) -> Trimap {
    let labels = prob
        .data()
        .iter()
        .map(|&p| {
            if p < params.neg_threshold {
                Label::Negative
            } else if p > params.pos_threshold {
                Label::Positive
            } else {
                Label::DontCare
            }
        })
        .collect();
    Trimap {
        width: prob.width(),
        height: prob.height(),
        labels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryOp {
    Erode,
    Dilate,
}

/// The fair coin behind [`degrade_boundary`].
pub fn boundary_op(rng_seed: u64) -> BoundaryOp {
    if ChaCha8Rng::seed_from_u64(rng_seed).gen_bool(0.5) {
        BoundaryOp::Erode
    } else {
        BoundaryOp::Dilate
    }
}

pub fn degrade_boundary(mask: &BinaryMask, kernel_size: usize, rng_seed: u64) -> Result<BinaryMask> {
    match boundary_op(rng_seed) {
        BoundaryOp::Erode => erode(mask, kernel_size),
        BoundaryOp::Dilate => dilate(mask, kernel_size),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Top, Side::Bottom];

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            "top" => Some(Side::Top),
            "bottom" => Some(Side::Bottom),
            _ => None,
        }
    }
}

/// Zeroes a strip of the tight bounding box anchored at one side. The strip
/// spans the box along that side and is `round(fraction * extent)` thick,
/// where the extent is the box size perpendicular to the side. Without an
/// explicit side one is drawn from the seed.
pub fn degrade_truncate(mask: &BinaryMask, area_fraction: f64, side: Option<Side>, rng_seed: u64) -> Result<BinaryMask> {
    if !(0.0..1.0).contains(&area_fraction) {
        return Err(Error::invalid("degrade.fraction", format!("must be in [0, 1), got {area_fraction}")));
    }
    let b = tight_bbox(mask)?;
    let side = side.unwrap_or_else(|| Side::ALL[ChaCha8Rng::seed_from_u64(rng_seed).gen_range(0..4)]);
    let extent = match side {
        Side::Left | Side::Right => b.w,
        Side::Top | Side::Bottom => b.h,
    };
    let t = (area_fraction * extent as f64).round() as usize;
    let (x0, x1, y0, y1) = match side {
        Side::Left => (b.x, b.x + t, b.y, b.bottom()),
        Side::Right => (b.right() - t, b.right(), b.y, b.bottom()),
        Side::Top => (b.x, b.right(), b.y, b.y + t),
        Side::Bottom => (b.x, b.right(), b.bottom() - t, b.bottom()),
    };
    let mut out = mask.clone();
    for y in y0..y1 {
        for x in x0..x1 {
            out.set(x, y, false);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degradation {
    None,
    Boundary { kernel_size: usize },
    Truncate { area_fraction: f64, side: Option<Side> },
}

impl Degradation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Degradation::None => Ok(()),
            Degradation::Boundary { kernel_size } if kernel_size % 2 == 0 => Err(Error::EvenKernel(kernel_size)),
            Degradation::Boundary { .. } => Ok(()),
            Degradation::Truncate { area_fraction, .. } if !(0.0..1.0).contains(&area_fraction) => {
                Err(Error::invalid("degrade.fraction", "must be in [0, 1)"))
            }
            Degradation::Truncate { .. } => Ok(()),
        }
    }

    /// Applies the degradation to a mask; `None` returns it unchanged.
    pub fn apply(&self, mask: &BinaryMask, rng_seed: u64) -> Result<BinaryMask> {
        match *self {
            Degradation::None => Ok(mask.clone()),
            Degradation::Boundary { kernel_size } => degrade_boundary(mask, kernel_size, rng_seed),
            Degradation::Truncate { area_fraction, side } => {
                if mask.is_empty() {
                    Ok(mask.clone())
                } else {
                    degrade_truncate(mask, area_fraction, side, rng_seed)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetParams {
    pub jitter: JitterParams,
    pub trimap: TrimapParams,
    pub degradation: Degradation,
    /// Crop side.
    pub w: usize,
    /// Target side.
    pub s: usize,
    /// Threshold used to turn the crop map into a mask before degrading.
    pub mask_threshold: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            jitter: JitterParams::default(),
            trimap: TrimapParams::default(),
            degradation: Degradation::None,
            w: 64,
            s: 16,
            mask_threshold: 0.5,
        }
    }
}

impl DatasetParams {
    pub fn validate(&self) -> Result<()> {
        self.jitter.validate()?;
        self.trimap.validate()?;
        self.degradation.validate()?;
        if self.w == 0 {
            return Err(Error::invalid("dataset.w", "must be >= 1"));
        }
        if self.s == 0 || self.s > self.w {
            return Err(Error::invalid("dataset.s", "must be in 1..=w"));
        }
        if !(0.0..1.0).contains(&self.mask_threshold) {
            return Err(Error::invalid("dataset.mask_threshold", "must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: RasterU8,
    pub target: Trimap,
    pub video: String,
    pub frame: usize,
}

/// Crop plus its `s x s` target map before trimap conversion. The map is the
/// area-averaged crop probability, or, when a degradation is configured, the
/// area-averaged degraded crop mask.
pub fn crop_and_target(image: &RasterU8, prob: &ProbMap, params: &DatasetParams, seed: u64) -> Result<(RasterU8, ProbMap)> {
    let jitter = JitterParams { rng_seed: seed, ..params.jitter };
    let (crop, crop_map) = sample_crop(image, prob, &jitter, params.w)?;
    let target = match params.degradation {
        Degradation::None => downsample_prob(&crop_map, params.s)?,
        d => {
            let mask = crop_map.binarize(params.mask_threshold);
            // the coin for the degradation is independent of the jitter draw
            downsample_mask(&d.apply(&mask, seed ^ 0x4445_4752_4144_45)?, params.s)?
        }
    };
    Ok((crop, target))
}

pub fn make_sample(image: &RasterU8, prob: &ProbMap, params: &DatasetParams, seed: u64) -> Result<(RasterU8, Trimap)> {
    let (crop, target) = crop_and_target(image, prob, params, seed)?;
    Ok((crop, to_trimap(&target, &params.trimap)))
}
