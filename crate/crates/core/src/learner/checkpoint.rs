//! Checkpoint file: a short text header followed by the parameters as
//! little-endian 64-bit floats in declaration order.
//!
//! ```text
//! moveseg-segnet 1
//! arch conv:8:3:2 conv:16:3:2 conv:32:3:2
//! input 64 3
//! output 16
//! seed 7
//! params 525792
//! data
//! <params * 8 bytes>
//! ```

use std::fs;
use std::path::Path;

use super::{Architecture, SegNet};
use crate::error::{Error, Result};

const MAGIC: &str = "moveseg-segnet 1";

pub fn encode_checkpoint(net: &SegNet) -> Vec<u8> {
    let header = format!(
        "{MAGIC}\narch {}\ninput {} {}\noutput {}\nseed {}\nparams {}\ndata\n",
        net.architecture(),
        net.input_side(),
        net.input_channels(),
        net.output_side(),
        net.seed(),
        net.param_count()
    );
    let mut out = header.into_bytes();
    out.reserve(net.param_count() * 8);
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<SegNet> {
    let bad = |r: &str| Error::format("checkpoint", r.to_string());
    let mut pos = 0;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not text"))
    };
    if next_line()? != MAGIC {
        return Err(bad("unknown format"));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = next_line()?;
        line.strip_prefix(key)
            .and_then(|v| v.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("expected `{key}` line, got {line:?}")))
    };
    let arch: Architecture = field("arch")?.parse()?;
    let input = field("input")?;
    let mut it = input.split_whitespace().map(|v| v.parse::<usize>());
    let (w, c) = match (it.next(), it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(c)), None) => (w, c),
        _ => return Err(bad("bad input line")),
    };
    let s: usize = field("output")?.parse().map_err(|_| bad("bad output line"))?;
    let seed: u64 = field("seed")?.parse().map_err(|_| bad("bad seed line"))?;
    let count: usize = field("params")?.parse().map_err(|_| bad("bad params line"))?;
    if next_line()? != "data" {
        return Err(bad("missing data marker"));
    }
    let body = &bytes[pos..];
    if body.len() != count * 8 {
        return Err(bad(&format!("expected {} parameter bytes, got {}", count * 8, body.len())));
    }
    let params = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    SegNet::with_params(arch, w, c, s, seed, params)
}

pub fn save_checkpoint(net: &SegNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SegNet> {
    let path = path.as_ref();
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
