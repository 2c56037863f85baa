//! Binary portable anymap I/O (P5 gray, P6 RGB, maxval 255).
//!
//! Headers are written as `P5\n<w> <h>\n255\n` with exactly one whitespace byte
//! before the sample block, so encode/decode round-trips bit-exactly.

use std::fs;
use std::path::Path;

use super::raster::{BinaryMask, ProbMap, RasterU8};
use crate::error::{Error, Result};

pub fn encode(raster: &RasterU8) -> Vec<u8> {
    let magic = if raster.channels() == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", raster.width(), raster.height());
    let mut out = Vec::with_capacity(header.len() + raster.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(raster.data());
    out
}

pub fn decode(bytes: &[u8]) -> Result<RasterU8> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::format("anymap", format!("unsupported magic {other:?}"))),
    };
    let width = parse_num(&next_token(bytes, &mut pos)?)?;
    let height = parse_num(&next_token(bytes, &mut pos)?)?;
    let maxval = parse_num(&next_token(bytes, &mut pos)?)?;
    if maxval != 255 {
        return Err(Error::format("anymap", format!("maxval must be 255, got {maxval}")));
    }
    // exactly one whitespace byte separates the header from the samples
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format("anymap", "missing whitespace after header"));
    }
    pos += 1;
    let need = width * height * channels;
    let body = &bytes[pos..];
    if body.len() < need {
        return Err(Error::format(
            "anymap",
            format!("expected {need} sample bytes, found {}", body.len()),
        ));
    }
    RasterU8::new(width, height, channels, body[..need].to_vec())
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format("anymap", "truncated header"));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_num(token: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| Error::format("anymap", format!("bad header number {token:?}")))
}

pub fn load(path: impl AsRef<Path>) -> Result<RasterU8> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn save(raster: &RasterU8, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(raster)).map_err(|e| Error::io(path, e))
}

/// Foreground is stored as 255, background as 0.
pub fn mask_to_raster(mask: &BinaryMask) -> RasterU8 {
    let data = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    RasterU8::new(mask.width(), mask.height(), 1, data).expect("mask dimensions are valid")
}

/// Any sample >= 128 reads as foreground.
pub fn raster_to_mask(raster: &RasterU8) -> BinaryMask {
    let gray = raster.to_gray();
    let data = gray.data().iter().map(|&v| v >= 128).collect();
    BinaryMask::new(gray.width(), gray.height(), data).expect("raster dimensions are valid")
}

pub fn prob_to_raster(prob: &ProbMap) -> RasterU8 {
    let data = prob.data().iter().map(|&p| (255.0 * p).round() as u8).collect();
    RasterU8::new(prob.width(), prob.height(), 1, data).expect("map dimensions are valid")
}

pub fn raster_to_prob(raster: &RasterU8) -> ProbMap {
    let gray = raster.to_gray();
    let data = gray.data().iter().map(|&v| v as f64 / 255.0).collect();
    ProbMap::new(gray.width(), gray.height(), data).expect("raster dimensions are valid")
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    save(&mask_to_raster(mask), path)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    load(path).map(|r| raster_to_mask(&r))
}

pub fn save_prob(prob: &ProbMap, path: impl AsRef<Path>) -> Result<()> {
    save(&prob_to_raster(prob), path)
}

pub fn load_prob(path: impl AsRef<Path>) -> Result<ProbMap> {
    load(path).map(|r| raster_to_prob(&r))
}
