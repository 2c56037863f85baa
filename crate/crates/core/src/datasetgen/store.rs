use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{make_sample, DatasetParams, Sample, Trimap};
use crate::error::{Error, Result};
use crate::imgcore::{pnm, ProbMap, RasterU8};

/// One frame offered to the dataset builder, with the pruning verdict.
#[derive(Debug, Clone)]
pub struct FrameSource {
    pub video: String,
    pub shot: usize,
    pub frame: usize,
    pub image: RasterU8,
    pub prob: ProbMap,
    pub keep: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ManifestEntry {
    pub id: String,
    pub video: String,
    pub frame: usize,
    pub shot: usize,
    pub seed: u64,
}

pub fn sample_id(video: &str, frame: usize) -> String {
    let clean: String = video
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{clean}_{frame:06}")
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-sample seed derived from the global seed and the frame's provenance,
/// independent of processing order.
pub fn sample_seed(global: u64, video: &str, frame: usize) -> u64 {
    // FNV-1a over the video name
    let name = video
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3));
    splitmix(splitmix(global ^ name) ^ frame as u64)
}

/// Writes one sample per kept frame under `out_dir` and returns the manifest,
/// sorted by video then frame. Kept frames without any object pixel are
/// skipped with a warning.
pub fn build_dataset(
    inputs: &[FrameSource],
    params: &DatasetParams,
    global_seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<ManifestEntry>> {
    params.validate()?;
    let out_dir = out_dir.as_ref();
    for sub in ["images", "targets"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let made: Vec<Option<ManifestEntry>> = inputs
        .par_iter()
        .filter(|f| f.keep)
        .map(|f| {
            let seed = sample_seed(global_seed, &f.video, f.frame);
            let (image, target) = match make_sample(&f.image, &f.prob, params, seed) {
                Ok(s) => s,
                Err(Error::EmptyMask) => {
                    log::warn!("{} frame {}: no object pixels, skipped", f.video, f.frame);
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let id = sample_id(&f.video, f.frame);
            pnm::save(&image, out_dir.join("images").join(format!("{id}.ppm")))?;
            pnm::save(&target.to_raster(), out_dir.join("targets").join(format!("{id}.pgm")))?;
            Ok(Some(ManifestEntry {
                id,
                video: f.video.clone(),
                frame: f.frame,
                shot: f.shot,
                seed,
            }))
        })
        .collect::<Result<_>>()?;
    let mut entries: Vec<ManifestEntry> = made.into_iter().flatten().collect();
    entries.sort_by(|a, b| (&a.video, a.frame, &a.id).cmp(&(&b.video, b.frame, &b.id)));
    if let Some(w) = entries.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::invalid("dataset", format!("duplicate sample id {}", w[0].id)));
    }
    if entries.is_empty() {
        log::warn!("every frame was pruned; the dataset is empty");
    }
    write_manifest(out_dir.join("manifest.tsv"), &entries)?;
    Ok(entries)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let text: String = entries
        .iter()
        .map(|e| format!("{}\t{}\t{}\t{}\t{}\n", e.id, e.video, e.frame, e.shot, e.seed))
        .collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::format("dataset manifest", format!("bad line {line:?}"));
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(ManifestEntry {
                id: f[0].to_string(),
                video: f[1].to_string(),
                frame: f[2].parse().map_err(|_| bad())?,
                shot: f[3].parse().map_err(|_| bad())?,
                seed: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn load_sample(dir: impl AsRef<Path>, entry: &ManifestEntry) -> Result<Sample> {
    let dir = dir.as_ref();
    let image = pnm::load(dir.join("images").join(format!("{}.ppm", entry.id)))?;
    let target = Trimap::from_raster(&pnm::load(dir.join("targets").join(format!("{}.pgm", entry.id)))?)?;
    Ok(Sample {
        image,
        target,
        video: entry.video.clone(),
        frame: entry.frame,
    })
}

/// Manifest plus every sample it lists, in manifest order.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(Vec<ManifestEntry>, Vec<Sample>)> {
    let dir = dir.as_ref();
    let entries = read_manifest(dir.join("manifest.tsv"))?;
    let samples = entries.par_iter().map(|e| load_sample(dir, e)).collect::<Result<_>>()?;
    Ok((entries, samples))
}

/// Seeded uniform subset of `round(fraction * n)` entries without
/// replacement, kept in manifest order.
pub fn subsample_dataset(entries: &[ManifestEntry], fraction: f64, rng_seed: u64) -> Result<Vec<ManifestEntry>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("subsample.fraction", format!("must be in (0, 1], got {fraction}")));
    }
    let n = entries.len();
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| entries[i].clone()).collect())
}
