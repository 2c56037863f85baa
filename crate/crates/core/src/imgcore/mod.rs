//! Raster types, anymap I/O, color and gradient descriptors, and binary mask
//! morphology shared by the rest of the pipeline.

mod histogram;
mod hog;
mod morphology;
pub mod pnm;
mod raster;
mod resample;

pub use histogram::{chi_squared, color_histogram, frame_histogram};
pub use hog::{hog_descriptor, HogParams, HOG_EPSILON};
pub use morphology::{close, dilate, erode, open};
pub use raster::{luma, tight_bbox, BBox, BinaryMask, FloatRaster, ProbMap, RasterU8, Sized2d};
pub(crate) use raster::{check_dims, ensure_same_size};
pub use resample::{
    area_resample, crop_bilinear, crop_prob, downsample_mask, downsample_prob, resize_bilinear,
};
