//! Synthetic fixtures with known ground truth: textured shapes on textured
//! backgrounds, and short videos of a textured square moving over a static
//! textured background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imgcore::{BinaryMask, RasterU8};

/// Box-blurred uniform noise, contrast stretched per channel to 0..=255.
pub fn smooth_noise(width: usize, height: usize, seed: u64, blur_radius: usize) -> RasterU8 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..width * height * 3).map(|_| rng.gen::<f64>()).collect();
    let r = blur_radius as isize;
    let mut out = vec![0.0; raw.len()];
    for y in 0..height as isize {
        for x in 0..width as isize {
            for c in 0..3 {
                let mut acc = 0.0;
                let mut n = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (sx, sy) = (x + dx, y + dy);
                        if sx >= 0 && sy >= 0 && sx < width as isize && sy < height as isize {
                            acc += raw[(sy as usize * width + sx as usize) * 3 + c];
                            n += 1.0;
                        }
                    }
                }
                out[(y as usize * width + x as usize) * 3 + c] = acc / n;
            }
        }
    }
    let mut data = vec![0u8; out.len()];
    for c in 0..3 {
        let vals = out.iter().skip(c).step_by(3);
        let lo = vals.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        for i in (c..out.len()).step_by(3) {
            data[i] = ((out[i] - lo) / span * 255.0).round() as u8;
        }
    }
    RasterU8::new(width, height, 3, data).expect("valid dimensions")
}

/// `base + amplitude * (noise - 0.5)` per channel.
fn tinted(noise: &RasterU8, base: [f64; 3], amplitude: f64) -> impl Fn(usize, usize, usize) -> u8 + '_ {
    move |x, y, c| {
        let n = noise.get(x, y, c) as f64 / 255.0 - 0.5;
        (base[c] + amplitude * n).round().clamp(0.0, 255.0) as u8
    }
}

fn random_color(rng: &mut impl Rng) -> [f64; 3] {
    [rng.gen_range(30.0..225.0), rng.gen_range(30.0..225.0), rng.gen_range(30.0..225.0)]
}

/// Two colors at least `min_dist` apart in RGB.
fn contrasting_colors(rng: &mut impl Rng, min_dist: f64) -> ([f64; 3], [f64; 3]) {
    loop {
        let a = random_color(rng);
        let b = random_color(rng);
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        if d >= min_dist {
            return (a, b);
        }
    }
}

/// One random ellipse or rectangle on a textured background.
pub fn shape_image(side: usize, seed: u64) -> (RasterU8, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5348_4150_4553);
    let (bg, fg) = contrasting_colors(&mut rng, 120.0);
    let bg_tex = smooth_noise(side, side, rng.gen(), 1);
    let fg_tex = smooth_noise(side, side, rng.gen(), 1);
    let s = side as f64;
    let rx = rng.gen_range(0.12..0.3) * s;
    let ry = rng.gen_range(0.12..0.3) * s;
    let cx = rng.gen_range(rx + 0.05 * s..s - rx - 0.05 * s);
    let cy = rng.gen_range(ry + 0.05 * s..s - ry - 0.05 * s);
    let ellipse = rng.gen_bool(0.5);
    let mask = BinaryMask::from_fn(side, side, |x, y| {
        let dx = (x as f64 + 0.5 - cx) / rx;
        let dy = (y as f64 + 0.5 - cy) / ry;
        if ellipse {
            dx * dx + dy * dy <= 1.0
        } else {
            dx.abs() <= 1.0 && dy.abs() <= 1.0
        }
    })
    .expect("valid dimensions");
    let bg_px = tinted(&bg_tex, bg, 70.0);
    let fg_px = tinted(&fg_tex, fg, 70.0);
    let image = RasterU8::from_fn(side, side, 3, |x, y, c| {
        if mask.get(x, y) {
            fg_px(x, y, c)
        } else {
            bg_px(x, y, c)
        }
    })
    .expect("valid dimensions");
    (image, mask)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub square_side: usize,
    /// Pixels per frame; zero gives a fully static video.
    pub speed: usize,
}

impl Default for VideoSpec {
    fn default() -> Self {
        // 20x20 square in a 64x64 frame covers ~10% of the pixels
        VideoSpec {
            width: 64,
            height: 64,
            frames: 8,
            square_side: 20,
            speed: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthVideo {
    pub frames: Vec<RasterU8>,
    pub masks: Vec<BinaryMask>,
}

/// Textured square translating along one of the four axis directions over a
/// static textured background.
pub fn moving_square_video(spec: &VideoSpec, seed: u64) -> SynthVideo {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5649_4445_4f);
    let (bg, fg) = contrasting_colors(&mut rng, 120.0);
    let bg_tex = smooth_noise(spec.width, spec.height, rng.gen(), 2);
    let fg_tex = smooth_noise(spec.square_side, spec.square_side, rng.gen(), 2);
    let dirs = [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)];
    let (dx, dy) = dirs[rng.gen_range(0..4)];
    let travel = (spec.speed * spec.frames.saturating_sub(1)) as isize;
    let side = spec.square_side as isize;
    let place = |extent: usize, dir: isize, rng: &mut ChaCha8Rng| -> isize {
        let room = extent as isize - side - if dir != 0 { travel } else { 0 };
        let start = if room > 0 { rng.gen_range(0..=room) } else { 0 };
        if dir < 0 {
            start + travel
        } else {
            start
        }
    };
    let x0 = place(spec.width, dx, &mut rng);
    let y0 = place(spec.height, dy, &mut rng);
    let bg_px = tinted(&bg_tex, bg, 70.0);
    let fg_px = tinted(&fg_tex, fg, 70.0);
    let mut frames = Vec::with_capacity(spec.frames);
    let mut masks = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames as isize {
        let sx = x0 + dx * spec.speed as isize * t;
        let sy = y0 + dy * spec.speed as isize * t;
        let inside = |x: usize, y: usize| {
            let (x, y) = (x as isize, y as isize);
            x >= sx && x < sx + side && y >= sy && y < sy + side
        };
        masks.push(BinaryMask::from_fn(spec.width, spec.height, inside).expect("valid dimensions"));
        frames.push(
            RasterU8::from_fn(spec.width, spec.height, 3, |x, y, c| {
                if inside(x, y) {
                    fg_px((x as isize - sx) as usize, (y as isize - sy) as usize, c)
                } else {
                    bg_px(x, y, c)
                }
            })
            .expect("valid dimensions"),
        );
    }
    SynthVideo { frames, masks }
}

/// Per-channel random gain in `1 ± strength` and offset in `± 40 * strength`.
pub fn color_jitter(frame: &RasterU8, strength: f64, seed: u64) -> RasterU8 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4a49_5454);
    let c = frame.channels();
    let gains: Vec<f64> = (0..c).map(|_| 1.0 + rng.gen_range(-strength..=strength)).collect();
    let offsets: Vec<f64> = (0..c).map(|_| 40.0 * rng.gen_range(-strength..=strength)).collect();
    RasterU8::from_fn(frame.width(), frame.height(), c, |x, y, ch| {
        (frame.get(x, y, ch) as f64 * gains[ch] + offsets[ch]).round().clamp(0.0, 255.0) as u8
    })
    .expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_square_covers_ten_percent_and_moves() {
        let v = moving_square_video(&VideoSpec::default(), 3);
        assert_eq!(v.frames.len(), 8);
        for m in &v.masks {
            assert_eq!(m.count(), 400);
            assert!((m.fraction() - 0.1).abs() < 0.01);
        }
        let b0 = crate::imgcore::tight_bbox(&v.masks[0]).unwrap();
        let b1 = crate::imgcore::tight_bbox(&v.masks[1]).unwrap();
        let shift = (b1.x as isize - b0.x as isize).abs() + (b1.y as isize - b0.y as isize).abs();
        assert_eq!(shift, 4);
    }

    #[test]
    fn static_video_has_identical_frames() {
        let spec = VideoSpec { speed: 0, ..VideoSpec::default() };
        let v = moving_square_video(&spec, 9);
        assert!(v.frames.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn shapes_are_deterministic_and_nonempty() {
        for seed in 0..20 {
            let (img, mask) = shape_image(96, seed);
            assert_eq!(shape_image(96, seed), (img.clone(), mask.clone()));
            let f = mask.fraction();
            assert!(f > 0.03 && f < 0.5, "seed {seed}: {f}");
        }
    }
}
