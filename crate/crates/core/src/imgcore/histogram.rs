use super::raster::RasterU8;
use crate::error::{Error, Result};

/// Per-channel color histogram over the pixels at `region` (flat pixel indices).
///
/// Channel histograms are concatenated, each L1-normalized to sum to 1, so the
/// whole vector sums to the channel count.
pub fn color_histogram(raster: &RasterU8, region: &[usize], bins_per_channel: usize) -> Result<Vec<f64>> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if bins_per_channel == 0 || bins_per_channel > 256 {
        return Err(Error::invalid(
            "bins_per_channel",
            format!("must be in 1..=256, got {bins_per_channel}"),
        ));
    }
    let channels = raster.channels();
    let mut counts = vec![0usize; channels * bins_per_channel];
    for &i in region {
        if i >= raster.pixel_count() {
            return Err(Error::DimensionMismatch(format!(
                "pixel index {i} outside {}x{} raster",
                raster.width(),
                raster.height()
            )));
        }
        for (c, &v) in raster.pixel(i).iter().enumerate() {
            counts[c * bins_per_channel + bin_of(v, bins_per_channel)] += 1;
        }
    }
    let n = region.len() as f64;
    Ok(counts.into_iter().map(|k| k as f64 / n).collect())
}

#[inline]
pub(crate) fn bin_of(value: u8, bins: usize) -> usize {
    value as usize * bins / 256
}

/// Histogram of every pixel of the raster.
pub fn frame_histogram(raster: &RasterU8, bins_per_channel: usize) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..raster.pixel_count()).collect();
    color_histogram(raster, &all, bins_per_channel)
}

/// `0.5 * sum (a - b)^2 / (a + b)`, skipping bins empty in both.
pub fn chi_squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, y)| *x + *y > 0.0)
        .map(|(x, y)| (x - y) * (x - y) / (x + y))
        .sum::<f64>()
        * 0.5
}
