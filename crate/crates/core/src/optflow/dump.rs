use std::fs;
use std::path::{Path, PathBuf};

use super::FlowField;
use crate::error::{Error, Result};
use crate::imgcore::{pnm, RasterU8};

/// Affine quantization of one component: `value = q * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowQuantization {
    pub scale: f64,
    pub offset: f64,
}

impl FlowQuantization {
    fn fit(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = if hi > lo { (hi - lo) / 255.0 } else { 1.0 };
        FlowQuantization { scale, offset: lo }
    }

    fn quantize(&self, v: f64) -> u8 {
        ((v - self.offset) / self.scale).round().clamp(0.0, 255.0) as u8
    }

    fn dequantize(&self, q: u8) -> f64 {
        q as f64 * self.scale + self.offset
    }
}

fn paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{stem}_u.pgm")),
        dir.join(format!("{stem}_v.pgm")),
        dir.join(format!("{stem}.flow.txt")),
    )
}

/// Writes `<stem>_u.pgm`, `<stem>_v.pgm` and the `<stem>.flow.txt` sidecar.
pub fn save_flow_dump(flow: &FlowField, dir: impl AsRef<Path>, stem: &str) -> Result<[FlowQuantization; 2]> {
    let (pu, pv, pt) = paths(dir.as_ref(), stem);
    let qu = FlowQuantization::fit(flow.u());
    let qv = FlowQuantization::fit(flow.v());
    for (q, values, path) in [(qu, flow.u(), &pu), (qv, flow.v(), &pv)] {
        let data = values.iter().map(|&v| q.quantize(v)).collect();
        pnm::save(&RasterU8::new(flow.width(), flow.height(), 1, data)?, path)?;
    }
    let sidecar = format!(
        "{} {}\nu {:e} {:e}\nv {:e} {:e}\n",
        flow.width(),
        flow.height(),
        qu.scale,
        qu.offset,
        qv.scale,
        qv.offset
    );
    fs::write(&pt, sidecar).map_err(|e| Error::io(&pt, e))?;
    Ok([qu, qv])
}

pub fn load_flow_dump(dir: impl AsRef<Path>, stem: &str) -> Result<FlowField> {
    let (pu, pv, pt) = paths(dir.as_ref(), stem);
    let text = fs::read_to_string(&pt).map_err(|e| Error::io(&pt, e))?;
    let mut lines = text.lines();
    let bad = |r: &str| Error::format("flow sidecar", r.to_string());
    let dims: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("missing size line"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad size")))
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(bad("size line needs width and height"));
    }
    let mut quant = Vec::new();
    for name in ["u", "v"] {
        let line = lines.next().ok_or_else(|| bad("missing component line"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != name {
            return Err(bad(&format!("expected `{name} <scale> <offset>`")));
        }
        let scale: f64 = toks[1].parse().map_err(|_| bad("bad scale"))?;
        let offset: f64 = toks[2].parse().map_err(|_| bad("bad offset"))?;
        quant.push(FlowQuantization { scale, offset });
    }
    let ru = pnm::load(&pu)?;
    let rv = pnm::load(&pv)?;
    if ru.width() != dims[0] || ru.height() != dims[1] || rv.width() != dims[0] || rv.height() != dims[1] {
        return Err(Error::DimensionMismatch("flow dump rasters disagree with sidecar".into()));
    }
    let u = ru.data().iter().map(|&q| quant[0].dequantize(q)).collect();
    let v = rv.data().iter().map(|&q| quant[1].dequantize(q)).collect();
    FlowField::new(dims[0], dims[1], u, v)
}
