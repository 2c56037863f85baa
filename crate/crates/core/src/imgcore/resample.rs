use super::raster::{BBox, BinaryMask, ProbMap, RasterU8};
use crate::error::{Error, Result};

/// Per output index: the source indices it covers and their overlap weights.
fn area_weights(src_start: f64, src_len: f64, src_size: usize, out: usize) -> Vec<Vec<(usize, f64)>> {
    let step = src_len / out as f64;
    (0..out)
        .map(|i| {
            let a = src_start + i as f64 * step;
            let b = a + step;
            let first = a.floor().max(0.0) as usize;
            let last = (b.ceil() as usize).min(src_size);
            (first..last)
                .filter_map(|s| {
                    let overlap = (b.min(s as f64 + 1.0) - a.max(s as f64)).max(0.0);
                    (overlap > 0.0).then_some((s, overlap))
                })
                .collect()
        })
        .collect()
}

/// Area-average resampling of `values` (row-major `width x height`) restricted to
/// `region` into an `out_w x out_h` grid.
pub fn area_resample(
    values: &[f64],
    width: usize,
    height: usize,
    region: BBox,
    out_w: usize,
    out_h: usize,
) -> Result<Vec<f64>> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("output size", "must be >= 1"));
    }
    if !region.fits_in(width, height) {
        return Err(Error::DimensionMismatch(format!(
            "{region:?} outside {width}x{height}"
        )));
    }
    let wx = area_weights(region.x as f64, region.w as f64, width, out_w);
    let wy = area_weights(region.y as f64, region.h as f64, height, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for row in &wy {
        for col in &wx {
            let mut acc = 0.0;
            let mut area = 0.0;
            for &(sy, fy) in row {
                let line = &values[sy * width..(sy + 1) * width];
                for &(sx, fx) in col {
                    acc += fy * fx * line[sx];
                    area += fy * fx;
                }
            }
            out.push(acc / area);
        }
    }
    Ok(out)
}

/// Area-averaged `s x s` foreground fraction of the mask.
pub fn downsample_mask(mask: &BinaryMask, s: usize) -> Result<ProbMap> {
    downsample_prob(&ProbMap::from_mask(mask), s)
}

pub fn downsample_prob(prob: &ProbMap, s: usize) -> Result<ProbMap> {
    let full = BBox::new(0, 0, prob.width(), prob.height());
    crop_prob(prob, full, s, s)
}

pub fn crop_prob(prob: &ProbMap, region: BBox, out_w: usize, out_h: usize) -> Result<ProbMap> {
    let v = area_resample(prob.data(), prob.width(), prob.height(), region, out_w, out_h)?;
    ProbMap::from_clamped(out_w, out_h, v)
}

/// Bilinear resampling of `region` to `out_w x out_h`, sampling at pixel centers.
pub fn crop_bilinear(raster: &RasterU8, region: BBox, out_w: usize, out_h: usize) -> Result<RasterU8> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("output size", "must be >= 1"));
    }
    if !region.fits_in(raster.width(), raster.height()) {
        return Err(Error::DimensionMismatch(format!(
            "{region:?} outside {}x{}",
            raster.width(),
            raster.height()
        )));
    }
    let sx = region.w as f64 / out_w as f64;
    let sy = region.h as f64 / out_h as f64;
    let max_x = (region.right() - 1) as f64;
    let max_y = (region.bottom() - 1) as f64;
    let c = raster.channels();
    RasterU8::from_fn(out_w, out_h, c, |ox, oy, ch| {
        let fx = (region.x as f64 + (ox as f64 + 0.5) * sx - 0.5).clamp(region.x as f64, max_x);
        let fy = (region.y as f64 + (oy as f64 + 0.5) * sy - 0.5).clamp(region.y as f64, max_y);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(region.right() - 1);
        let y1 = (y0 + 1).min(region.bottom() - 1);
        let ax = fx - x0 as f64;
        let ay = fy - y0 as f64;
        let p = |x, y| raster.get(x, y, ch) as f64;
        let top = p(x0, y0) * (1.0 - ax) + p(x1, y0) * ax;
        let bottom = p(x0, y1) * (1.0 - ax) + p(x1, y1) * ax;
        (top * (1.0 - ay) + bottom * ay).round().clamp(0.0, 255.0) as u8
    })
}

pub fn resize_bilinear(raster: &RasterU8, out_w: usize, out_h: usize) -> Result<RasterU8> {
    crop_bilinear(raster, BBox::new(0, 0, raster.width(), raster.height()), out_w, out_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_true_downsamples_to_ones() {
        let m = BinaryMask::full(13, 7).unwrap();
        for s in [1, 3, 5, 16] {
            let p = downsample_mask(&m, s).unwrap();
            assert!(p.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn quarter_pixel() {
        let m = BinaryMask::from_fn(2, 2, |x, y| x == 0 && y == 0).unwrap();
        let p = downsample_mask(&m, 1).unwrap();
        assert_eq!(p.data(), &[0.25]);
    }

    #[test]
    fn same_size_is_identity() {
        let m = BinaryMask::from_fn(9, 9, |x, y| (x * 7 + y * 3) % 5 < 2).unwrap();
        let p = downsample_mask(&m, 9).unwrap();
        assert_eq!(p, ProbMap::from_mask(&m));
    }

    #[test]
    fn bilinear_identity_and_constant() {
        let r = RasterU8::from_fn(5, 4, 3, |x, y, c| (x * 40 + y * 9 + c) as u8).unwrap();
        assert_eq!(resize_bilinear(&r, 5, 4).unwrap(), r);
        let k = RasterU8::filled(7, 3, 1, 77).unwrap();
        assert!(resize_bilinear(&k, 11, 13).unwrap().data().iter().all(|&v| v == 77));
    }

    proptest! {
        #[test]
        fn fraction_preserved_when_divisible(
            s in 1usize..6, fx in 1usize..4, fy in 1usize..4, seed in any::<u64>()
        ) {
            let (w, h) = (s * fx, s * fy);
            let mut st = seed | 1;
            let m = BinaryMask::from_fn(w, h, |_, _| {
                st ^= st << 13; st ^= st >> 7; st ^= st << 17;
                st & 1 == 1
            }).unwrap();
            let p = downsample_mask(&m, s).unwrap();
            let mean: f64 = p.data().iter().sum::<f64>() / (s * s) as f64;
            prop_assert!((mean - m.fraction()).abs() < 1e-12);
        }
    }
}
