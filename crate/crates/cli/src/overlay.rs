use moveseg_core::imgcore::{BinaryMask, RasterU8};
use moveseg_core::{Error, Result};

pub const HIGHLIGHT: [u8; 3] = [255, 0, 0];

/// Foreground pixels become `round(0.5 * pixel + 0.5 * HIGHLIGHT)`; the rest
/// are copied. Gray images are promoted to RGB.
pub fn overlay(image: &RasterU8, mask: &BinaryMask) -> Result<RasterU8> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} vs mask {}x{}",
            image.width(),
            image.height(),
            mask.width(),
            mask.height()
        )));
    }
    let rgb = image.to_rgb();
    RasterU8::from_fn(rgb.width(), rgb.height(), 3, |x, y, c| {
        let p = rgb.get(x, y, c);
        if mask.get(x, y) {
            ((p as u16 + HIGHLIGHT[c] as u16 + 1) / 2) as u8
        } else {
            p
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image() -> RasterU8 {
        RasterU8::from_fn(5, 4, 3, |x, y, c| (x * 40 + y * 13 + c * 7) as u8).unwrap()
    }

    #[test]
    fn empty_mask_leaves_image() {
        let img = image();
        assert_eq!(overlay(&img, &BinaryMask::empty(5, 4).unwrap()).unwrap(), img);
    }

    #[test]
    fn full_mask_blends_everywhere() {
        let img = image();
        let out = overlay(&img, &BinaryMask::full(5, 4).unwrap()).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                for c in 0..3 {
                    let want = (0.5 * img.get(x, y, c) as f64 + 0.5 * HIGHLIGHT[c] as f64).round();
                    assert_eq!(out.get(x, y, c) as f64, want);
                }
            }
        }
    }

    #[test]
    fn one_pixel_by_hand() {
        let img = RasterU8::new(1, 1, 3, vec![100, 51, 200]).unwrap();
        let out = overlay(&img, &BinaryMask::full(1, 1).unwrap()).unwrap();
        // (100+255)/2 = 177.5, (51+0)/2 = 25.5, (200+0)/2 = 100
        assert_eq!(out.data(), &[178, 26, 100]);
    }

    #[test]
    fn size_mismatch_errors() {
        assert!(overlay(&image(), &BinaryMask::empty(4, 4).unwrap()).is_err());
    }
}
