//! Binary morphology with a square structuring element.
//!
//! Pixels outside the frame count as background for both operations, so
//! erosion eats into objects touching the border and dilation never reads
//! foreground from outside.

use super::raster::BinaryMask;
use crate::error::{Error, Result};

fn check_kernel(kernel_size: usize) -> Result<usize> {
    if kernel_size % 2 == 0 {
        return Err(Error::EvenKernel(kernel_size));
    }
    Ok(kernel_size / 2)
}

pub fn erode(mask: &BinaryMask, kernel_size: usize) -> Result<BinaryMask> {
    let r = check_kernel(kernel_size)?;
    Ok(separable(mask, r, true))
}

pub fn dilate(mask: &BinaryMask, kernel_size: usize) -> Result<BinaryMask> {
    let r = check_kernel(kernel_size)?;
    Ok(separable(mask, r, false))
}

pub fn open(mask: &BinaryMask, kernel_size: usize) -> Result<BinaryMask> {
    dilate(&erode(mask, kernel_size)?, kernel_size)
}

/// Closing of the mask as a subset of the unbounded plane: dilation may spill
/// past the frame, so the erosion is done on a canvas padded by the kernel
/// radius and cropped back. This keeps `close(X) ⊇ X` at the borders.
pub fn close(mask: &BinaryMask, kernel_size: usize) -> Result<BinaryMask> {
    let r = check_kernel(kernel_size)?;
    let (w, h) = (mask.width(), mask.height());
    let padded = BinaryMask::from_fn(w + 2 * r, h + 2 * r, |x, y| {
        x >= r && y >= r && x < w + r && y < h + r && mask.get(x - r, y - r)
    })?;
    let closed = separable(&separable(&padded, r, false), r, true);
    BinaryMask::from_fn(w, h, |x, y| closed.get(x + r, y + r))
}

/// Square min (erode) or max (dilate) filter done as two 1-D passes using a
/// running count of foreground pixels in the window.
fn separable(mask: &BinaryMask, r: usize, erode: bool) -> BinaryMask {
    if r == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let src = mask.data();
    let full = 2 * r + 1;
    let mut tmp = vec![false; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        window_pass(w, full, r, erode, |i| row[i], |i, v| tmp[y * w + i] = v);
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        window_pass(h, full, r, erode, |i| tmp[i * w + x], |i, v| out[i * w + x] = v);
    }
    BinaryMask::new(w, h, out).expect("same dimensions as input")
}

fn window_pass(
    n: usize,
    full: usize,
    r: usize,
    erode: bool,
    get: impl Fn(usize) -> bool,
    mut put: impl FnMut(usize, bool),
) {
    // count of foreground samples in [i - r, i + r] ∩ [0, n)
    let mut count = (0..r.min(n)).filter(|&i| get(i)).count();
    for i in 0..n {
        if i + r < n && get(i + r) {
            count += 1;
        }
        if i > r && get(i - r - 1) {
            count -= 1;
        }
        let v = if erode { count == full } else { count > 0 };
        put(i, v);
    }
}
