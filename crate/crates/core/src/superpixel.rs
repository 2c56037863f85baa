//! SLIC superpixels with 4-connectivity enforcement.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imgcore::{ensure_same_size, FloatRaster, ProbMap, RasterU8};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlicColorSpace {
    /// CIELAB from 8-bit sRGB.
    Lab,
    /// Raw RGB; channel-symmetric.
    Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicParams {
    pub target_regions: usize,
    pub compactness: f64,
    pub iterations: usize,
    pub color_space: SlicColorSpace,
}

impl Default for SlicParams {
    fn default() -> Self {
        SlicParams {
            target_regions: 300,
            compactness: 10.0,
            iterations: 10,
            color_space: SlicColorSpace::Lab,
        }
    }
}

/// Region id per pixel plus per-region statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    region_count: usize,
    centroids: Vec<(f64, f64)>,
    sizes: Vec<usize>,
}

impl SuperpixelLabeling {
    /// Builds a labeling from raw ids, which must be exactly `0..region_count`
    /// with every id used.
    pub fn from_labels(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        crate::imgcore::check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} labeling needs {} ids, got {}",
                width * height,
                labels.len()
            )));
        }
        let region_count = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let mut sizes = vec![0usize; region_count];
        let mut sums = vec![(0.0f64, 0.0f64); region_count];
        for (i, &l) in labels.iter().enumerate() {
            let l = l as usize;
            sizes[l] += 1;
            sums[l].0 += (i % width) as f64;
            sums[l].1 += (i / width) as f64;
        }
        if let Some(gap) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::format("superpixel labeling", format!("region id {gap} is unused")));
        }
        let centroids = sums
            .iter()
            .zip(&sizes)
            .map(|(&(sx, sy), &n)| (sx / n as f64, sy / n as f64))
            .collect();
        Ok(SuperpixelLabeling {
            width,
            height,
            labels,
            region_count,
            centroids,
            sizes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn centroids(&self) -> &[(f64, f64)] {
        &self.centroids
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x] as usize
    }

    /// Flat pixel indices of every region, in raster order.
    pub fn region_pixels(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&n| Vec::with_capacity(n)).collect();
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }

    /// True if every region is a single 4-connected component.
    pub fn is_connected(&self) -> bool {
        let (_, count) = components(&self.labels, self.width, self.height);
        count == self.region_count
    }

    /// One text header line `width height region_count`, then 16-bit
    /// big-endian ids in raster order.
    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.region_count > u16::MAX as usize + 1 {
            return Err(Error::invalid(
                "region_count",
                format!("{} regions do not fit 16-bit ids", self.region_count),
            ));
        }
        let mut out = format!("{} {} {}\n", self.width, self.height, self.region_count).into_bytes();
        out.reserve(self.labels.len() * 2);
        for &l in &self.labels {
            out.extend_from_slice(&(l as u16).to_be_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("labeling", "missing header line"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::format("labeling", "header is not text"))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::format("labeling", format!("bad number {t:?}"))))
            .collect::<Result<_>>()?;
        let [w, h, count] = nums[..] else {
            return Err(Error::format("labeling", "header needs `width height region_count`"));
        };
        let body = &bytes[nl + 1..];
        if body.len() != w * h * 2 {
            return Err(Error::format("labeling", format!("expected {} bytes of ids, got {}", w * h * 2, body.len())));
        }
        let labels = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).collect();
        let lab = Self::from_labels(w, h, labels)?;
        if lab.region_count != count {
            return Err(Error::format(
                "labeling",
                format!("header says {count} regions, ids give {}", lab.region_count),
            ));
        }
        Ok(lab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

impl crate::imgcore::Sized2d for SuperpixelLabeling {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// CIELAB under D65 from 8-bit sRGB.
pub fn srgb_to_lab(r: u8, g: u8, b: u8) -> [f64; 3] {
    let (r, g, b) = (srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b));
    let x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

#[derive(Debug, Clone, Copy)]
struct Center {
    color: [f64; 3],
    x: f64,
    y: f64,
}

pub fn slic(raster: &RasterU8, params: &SlicParams) -> Result<SuperpixelLabeling> {
    let (w, h) = (raster.width(), raster.height());
    let n = w * h;
    if params.target_regions == 0 || params.target_regions > n {
        return Err(Error::invalid(
            "superpixel.target_regions",
            format!("must be in 1..={n}, got {}", params.target_regions),
        ));
    }
    if params.iterations == 0 {
        return Err(Error::invalid("superpixel.iterations", "must be >= 1"));
    }
    if !params.compactness.is_finite() || params.compactness < 0.0 {
        return Err(Error::invalid("superpixel.compactness", "must be finite and >= 0"));
    }
    let rgb = raster.to_rgb();
    let colors: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let p = rgb.pixel(i);
            match params.color_space {
                SlicColorSpace::Lab => srgb_to_lab(p[0], p[1], p[2]),
                SlicColorSpace::Rgb => [p[0] as f64, p[1] as f64, p[2] as f64],
            }
        })
        .collect();

    let k = params.target_regions;
    let s = (n as f64 / k as f64).sqrt();
    let (nx, ny) = if k == 1 {
        (1, 1)
    } else {
        (
            ((w as f64 / s).round() as usize).clamp(1, w),
            ((h as f64 / s).round() as usize).clamp(1, h),
        )
    };
    let step_x = w as f64 / nx as f64;
    let step_y = h as f64 / ny as f64;
    let interval = (step_x * step_y).sqrt();
    let spatial_weight = params.compactness / interval;

    let mut centers = Vec::with_capacity(nx * ny);
    let mut labels = vec![0u32; n];
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + 0.5) * step_x;
            let y = (j as f64 + 0.5) * step_y;
            let px = (x as usize).min(w - 1);
            let py = (y as usize).min(h - 1);
            centers.push(Center {
                color: colors[py * w + px],
                x,
                y,
            });
        }
    }
    for y in 0..h {
        let j = ((y as f64 / step_y) as usize).min(ny - 1);
        for x in 0..w {
            let i = ((x as f64 / step_x) as usize).min(nx - 1);
            labels[y * w + x] = (j * nx + i) as u32;
        }
    }

    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..params.iterations {
        dist.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let x_lo = (c.x - step_x).floor().max(0.0) as usize;
            let x_hi = ((c.x + step_x).ceil() as usize).min(w);
            let y_lo = (c.y - step_y).floor().max(0.0) as usize;
            let y_hi = ((c.y + step_y).ceil() as usize).min(h);
            for y in y_lo..y_hi {
                for x in x_lo..x_hi {
                    let i = y * w + x;
                    let p = &colors[i];
                    let dc = ((p[0] - c.color[0]).powi(2)
                        + (p[1] - c.color[1]).powi(2)
                        + (p[2] - c.color[2]).powi(2))
                    .sqrt();
                    let ds = ((x as f64 + 0.5 - c.x).powi(2) + (y as f64 + 0.5 - c.y).powi(2)).sqrt();
                    let d = dc + spatial_weight * ds;
                    if d < dist[i] {
                        dist[i] = d;
                        labels[i] = ci as u32;
                    }
                }
            }
        }
        let mut acc = vec![([0.0f64; 3], 0.0f64, 0.0f64, 0usize); centers.len()];
        for (i, &l) in labels.iter().enumerate() {
            let a = &mut acc[l as usize];
            for c in 0..3 {
                a.0[c] += colors[i][c];
            }
            a.1 += (i % w) as f64 + 0.5;
            a.2 += (i / w) as f64 + 0.5;
            a.3 += 1;
        }
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a.3 > 0 {
                let m = a.3 as f64;
                c.color = [a.0[0] / m, a.0[1] / m, a.0[2] / m];
                c.x = a.1 / m;
                c.y = a.2 / m;
            }
        }
    }

    let min_size = ((n / k) / 4).max(1);
    let labels = enforce_connectivity(labels, w, h, min_size);
    SuperpixelLabeling::from_labels(w, h, labels)
}

/// 4-connected components of equal labels; ids assigned in raster order.
fn components(labels: &[u32], w: usize, h: usize) -> (Vec<u32>, usize) {
    let mut comp = vec![u32::MAX; labels.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if comp[start] != u32::MAX {
            continue;
        }
        comp[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if comp[j] == u32::MAX && labels[j] == labels[i] {
                    comp[j] = count;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        count += 1;
    }
    (comp, count as usize)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Splits every label into its 4-connected components and merges components
/// smaller than `min_size` into the neighbor sharing the longest boundary,
/// until no small component is left. Returns ids `0..count` in raster order.
fn enforce_connectivity(labels: Vec<u32>, w: usize, h: usize, min_size: usize) -> Vec<u32> {
    let mut labels = labels;
    loop {
        let (comp, count) = components(&labels, w, h);
        let mut sizes = vec![0usize; count];
        for &c in &comp {
            sizes[c as usize] += 1;
        }
        if count == 1 || sizes.iter().all(|&s| s >= min_size) {
            return comp;
        }
        let mut boundary: HashMap<(u32, u32), usize> = HashMap::new();
        for y in 0..h {
            for x in 0..w {
                let a = comp[y * w + x];
                let mut touch = |b: u32| {
                    if a != b {
                        if sizes[a as usize] < min_size {
                            *boundary.entry((a, b)).or_default() += 1;
                        }
                        if sizes[b as usize] < min_size {
                            *boundary.entry((b, a)).or_default() += 1;
                        }
                    }
                };
                if x + 1 < w {
                    touch(comp[y * w + x + 1]);
                }
                if y + 1 < h {
                    touch(comp[(y + 1) * w + x]);
                }
            }
        }
        let mut best: Vec<Option<(usize, u32)>> = vec![None; count];
        for (&(a, b), &len) in &boundary {
            let slot = &mut best[a as usize];
            let better = match *slot {
                None => true,
                Some((l, c)) => len > l || (len == l && b < c),
            };
            if better {
                *slot = Some((len, b));
            }
        }
        let mut parent: Vec<usize> = (0..count).collect();
        for (a, b) in best.iter().enumerate() {
            if let Some((_, b)) = b {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, *b as usize);
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        labels = comp.iter().map(|&c| find(&mut parent, c as usize) as u32).collect();
    }
}

/// Mean of `values` over each region.
pub fn region_means(labeling: &SuperpixelLabeling, values: &FloatRaster) -> Result<Vec<f64>> {
    ensure_same_size(labeling, values, "region means")?;
    let mut sums = vec![0.0; labeling.region_count];
    for (&l, &v) in labeling.labels.iter().zip(values.data()) {
        sums[l as usize] += v;
    }
    Ok(sums
        .iter()
        .zip(&labeling.sizes)
        .map(|(s, &n)| s / n as f64)
        .collect())
}

impl From<&ProbMap> for FloatRaster {
    fn from(p: &ProbMap) -> Self {
        FloatRaster::new(p.width(), p.height(), p.data().to_vec()).expect("valid dimensions")
    }
}
