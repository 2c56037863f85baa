//! Dense optical flow between consecutive frames.
//!
//! Coarse-to-fine local least squares (Lucas-Kanade) with iterative warping:
//! both frames are intensity-normalized, reduced into Gaussian pyramids, and at
//! every level the propagated estimate is refined by solving the 2x2 windowed
//! normal equations per pixel against the warped second frame. Pixels whose
//! structure tensor is near singular keep the propagated estimate. Below the
//! coarsest level each pixel also refines a zero-motion start and keeps
//! whichever estimate has the lower windowed residual.

mod dump;

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::imgcore::{ensure_same_size, FloatRaster, RasterU8};

pub use dump::{load_flow_dump, save_flow_dump, FlowQuantization};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    pub iterations_per_level: usize,
    pub window_radius: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            pyramid_levels: 3,
            iterations_per_level: 5,
            window_radius: 3,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("flow.pyramid_levels", self.pyramid_levels),
            ("flow.iterations_per_level", self.iterations_per_level),
            ("flow.window_radius", self.window_radius),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be >= 1"));
            }
        }
        Ok(())
    }
}

/// Per-pixel displacement (pixels/frame) from the first frame to the second,
/// expressed in the first frame's coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        crate::imgcore::check_dims(width, height)?;
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "flow components must have {} values",
                width * height
            )));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::invalid("flow", "non-finite component"));
        }
        Ok(FlowField { width, height, u, v })
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Result<Self> {
        Self::new(width, height, vec![u; width * height], vec![v; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Component-wise median.
    pub fn median(&self) -> (f64, f64) {
        (median(&self.u), median(&self.v))
    }
}

impl crate::imgcore::Sized2d for FlowField {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn zeros(w: usize, h: usize) -> Self {
        Plane {
            w,
            h,
            data: vec![0.0; w * h],
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.w + x]
    }

    #[inline]
    fn clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.at(x, y)
    }

    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.w - 1);
        let y1 = (y0 + 1).min(self.h - 1);
        let ax = x - x0 as f64;
        let ay = y - y0 as f64;
        let top = self.at(x0, y0) * (1.0 - ax) + self.at(x1, y0) * ax;
        let bottom = self.at(x0, y1) * (1.0 - ax) + self.at(x1, y1) * ax;
        top * (1.0 - ay) + bottom * ay
    }

    /// Zero-mean, unit-variance intensities; removes global gain and offset
    /// differences between the two frames.
    fn normalized(raster: &RasterU8) -> Plane {
        let gray = raster.to_gray();
        let n = gray.pixel_count() as f64;
        let mean = gray.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = gray
            .data()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        let scale = if var > 1e-12 { 1.0 / var.sqrt() } else { 1.0 };
        Plane {
            w: gray.width(),
            h: gray.height(),
            data: gray.data().iter().map(|&v| (v as f64 - mean) * scale).collect(),
        }
    }

    /// 5-tap binomial blur followed by 2x decimation.
    fn pyr_down(&self) -> Plane {
        const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let mut tmp = Plane::zeros(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                tmp.data[y * self.w + x] = (0..5)
                    .map(|k| K[k] * self.clamped(x as isize + k as isize - 2, y as isize))
                    .sum();
            }
        }
        let (nw, nh) = ((self.w + 1) / 2, (self.h + 1) / 2);
        let mut out = Plane::zeros(nw, nh);
        for y in 0..nh {
            for x in 0..nw {
                out.data[y * nw + x] = (0..5)
                    .map(|k| K[k] * tmp.clamped(2 * x as isize, 2 * y as isize + k as isize - 2))
                    .sum();
            }
        }
        out
    }

    fn gradients(&self) -> (Plane, Plane) {
        let mut gx = Plane::zeros(self.w, self.h);
        let mut gy = Plane::zeros(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                let (xi, yi) = (x as isize, y as isize);
                gx.data[y * self.w + x] = 0.5 * (self.clamped(xi + 1, yi) - self.clamped(xi - 1, yi));
                gy.data[y * self.w + x] = 0.5 * (self.clamped(xi, yi + 1) - self.clamped(xi, yi - 1));
            }
        }
        (gx, gy)
    }

    /// Sum over the `(2r+1)^2` window, truncated at the borders.
    fn box_sum(&self, r: usize) -> Plane {
        let mut tmp = Plane::zeros(self.w, self.h);
        for y in 0..self.h {
            let row = &self.data[y * self.w..(y + 1) * self.w];
            running_sum(self.w, r, |i| row[i], |i, v| tmp.data[y * self.w + i] = v);
        }
        let mut out = Plane::zeros(self.w, self.h);
        for x in 0..self.w {
            running_sum(self.h, r, |i| tmp.data[i * self.w + x], |i, v| out.data[i * self.w + x] = v);
        }
        out
    }
}

fn running_sum(n: usize, r: usize, get: impl Fn(usize) -> f64, mut put: impl FnMut(usize, f64)) {
    // recompute exactly per output to avoid drift in the floating point sum
    for i in 0..n {
        let lo = i.saturating_sub(r);
        let hi = (i + r + 1).min(n);
        put(i, (lo..hi).map(&get).sum());
    }
}

fn median3x3(p: &Plane) -> Plane {
    let mut out = Plane::zeros(p.w, p.h);
    let mut buf = [0.0f64; 9];
    for y in 0..p.h {
        for x in 0..p.w {
            let mut k = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    buf[k] = p.clamped(x as isize + dx, y as isize + dy);
                    k += 1;
                }
            }
            buf.sort_by(|a, b| a.total_cmp(b));
            out.data[y * p.w + x] = buf[4];
        }
    }
    out
}

const MIN_LEVEL_SIDE: usize = 4;

pub fn dense_flow(frame_a: &RasterU8, frame_b: &RasterU8, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    ensure_same_size(frame_a, frame_b, "flow frames")?;
    let mut pyr_a = vec![Plane::normalized(frame_a)];
    let mut pyr_b = vec![Plane::normalized(frame_b)];
    while pyr_a.len() < params.pyramid_levels {
        let last = pyr_a.last().unwrap();
        if last.w.div_ceil(2) < MIN_LEVEL_SIDE || last.h.div_ceil(2) < MIN_LEVEL_SIDE {
            break;
        }
        let next_a = last.pyr_down();
        let next_b = pyr_b.last().unwrap().pyr_down();
        pyr_a.push(next_a);
        pyr_b.push(next_b);
    }

    let mut u = Plane::zeros(pyr_a.last().unwrap().w, pyr_a.last().unwrap().h);
    let mut v = u.clone();
    for level in (0..pyr_a.len()).rev() {
        let (a, b) = (&pyr_a[level], &pyr_b[level]);
        if u.w != a.w || u.h != a.h {
            u = upsample_flow(&u, a.w, a.h);
            v = upsample_flow(&v, a.w, a.h);
        }
        refine_level(a, b, &mut u, &mut v, params);
        if level + 1 < pyr_a.len() {
            // a second hypothesis started from rest at this level: fixes pixels
            // that inherited a neighboring object's motion from the coarser level
            let mut u0 = Plane::zeros(a.w, a.h);
            let mut v0 = Plane::zeros(a.w, a.h);
            refine_level(a, b, &mut u0, &mut v0, params);
            let e = residual_energy(a, b, &u, &v, params.window_radius);
            let e0 = residual_energy(a, b, &u0, &v0, params.window_radius);
            for i in 0..u.data.len() {
                if e0.data[i] < e.data[i] {
                    u.data[i] = u0.data[i];
                    v.data[i] = v0.data[i];
                }
            }
        }
        u = median3x3(&u);
        v = median3x3(&v);
    }
    FlowField::new(u.w, u.h, u.data, v.data)
}

/// Doubles resolution and displacement magnitude.
fn upsample_flow(coarse: &Plane, w: usize, h: usize) -> Plane {
    let sx = coarse.w as f64 / w as f64;
    let sy = coarse.h as f64 / h as f64;
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let cx = (x as f64 + 0.5) * sx - 0.5;
            let cy = (y as f64 + 0.5) * sy - 0.5;
            out.data[y * w + x] = coarse.bilinear(cx, cy) / sx;
        }
    }
    out
}

/// Windowed sum of squared differences between `a` and `b` warped by the flow.
fn residual_energy(a: &Plane, b: &Plane, u: &Plane, v: &Plane, r: usize) -> Plane {
    let mut sq = Plane::zeros(a.w, a.h);
    for y in 0..a.h {
        for x in 0..a.w {
            let i = y * a.w + x;
            let d = b.bilinear(x as f64 + u.data[i], y as f64 + v.data[i]) - a.data[i];
            sq.data[i] = d * d;
        }
    }
    sq.box_sum(r)
}

fn refine_level(a: &Plane, b: &Plane, u: &mut Plane, v: &mut Plane, params: &FlowParams) {
    let r = params.window_radius;
    let area = ((2 * r + 1) * (2 * r + 1)) as f64;
    let min_eigen = 1e-2 * area;
    let max_step = r as f64;
    let (ax, ay) = a.gradients();
    let n = a.w * a.h;
    for _ in 0..params.iterations_per_level {
        let mut warped = Plane::zeros(a.w, a.h);
        for y in 0..a.h {
            for x in 0..a.w {
                let i = y * a.w + x;
                warped.data[i] = b.bilinear(x as f64 + u.data[i], y as f64 + v.data[i]);
            }
        }
        let (bx, by) = warped.gradients();
        let mut products: [Plane; 5] = std::array::from_fn(|_| Plane::zeros(a.w, a.h));
        for i in 0..n {
            let gx = 0.5 * (ax.data[i] + bx.data[i]);
            let gy = 0.5 * (ay.data[i] + by.data[i]);
            let gt = warped.data[i] - a.data[i];
            products[0].data[i] = gx * gx;
            products[1].data[i] = gx * gy;
            products[2].data[i] = gy * gy;
            products[3].data[i] = gx * gt;
            products[4].data[i] = gy * gt;
        }
        let [sxx, sxy, syy, sxt, syt] = products.map(|p| p.box_sum(r));
        for i in 0..n {
            let (xx, xy, yy) = (sxx.data[i], sxy.data[i], syy.data[i]);
            let det = xx * yy - xy * xy;
            let tr = xx + yy;
            let lambda_min = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
            if lambda_min < min_eigen || det <= 0.0 {
                continue;
            }
            let du = (-yy * sxt.data[i] + xy * syt.data[i]) / det;
            let dv = (xy * sxt.data[i] - xx * syt.data[i]) / det;
            if du.is_finite() && dv.is_finite() {
                u.data[i] += du.clamp(-max_step, max_step);
                v.data[i] += dv.clamp(-max_step, max_step);
            }
        }
    }
}

/// Per-pixel Euclidean norm of the flow vectors.
pub fn flow_magnitude(flow: &FlowField) -> FloatRaster {
    let data = flow
        .u
        .iter()
        .zip(&flow.v)
        .map(|(u, v)| (u * u + v * v).sqrt())
        .collect();
    FloatRaster::new(flow.width, flow.height, data).expect("flow dimensions are valid")
}

/// Orientation bin index for an angle, with bins of width `2*pi/bins` centered on
/// `k * 2*pi/bins`.
pub(crate) fn angle_bin(angle: f64, bins: usize) -> usize {
    let width = 2.0 * PI / bins as f64;
    let shifted = (angle + 0.5 * width).rem_euclid(2.0 * PI);
    ((shifted / width) as usize) % bins
}

/// Most populated orientation bin among pixels moving at least `magnitude_floor`.
///
/// Returns the bin's center angle in `(-pi, pi]` and the fraction of qualifying
/// pixels that fall into it. Ties go to the lower bin index; with no qualifying
/// pixel the result is `(0, 0)`.
pub fn dominant_direction(flow: &FlowField, magnitude_floor: f64, angle_bins: usize) -> Result<(f64, f64)> {
    if angle_bins < 4 {
        return Err(Error::invalid("angle_bins", format!("must be >= 4, got {angle_bins}")));
    }
    let mut counts = vec![0usize; angle_bins];
    let mut total = 0usize;
    for (&u, &v) in flow.u.iter().zip(&flow.v) {
        let mag = (u * u + v * v).sqrt();
        if mag >= magnitude_floor && mag > 0.0 {
            counts[angle_bin(v.atan2(u), angle_bins)] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Ok((0.0, 0.0));
    }
    let (best, &count) = counts
        .iter()
        .enumerate()
        .fold((0, &0), |acc, (i, c)| if *c > *acc.1 { (i, c) } else { acc });
    let mut angle = best as f64 * 2.0 * PI / angle_bins as f64;
    if angle > PI {
        angle -= 2.0 * PI;
    }
    Ok((angle, count as f64 / total as f64))
}

#[cfg(test)]
mod tests;
