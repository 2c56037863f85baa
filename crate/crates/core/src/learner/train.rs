use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SegNet;
use crate::datasetgen::{Sample, Trimap};
use crate::error::{Error, Result};
use crate::imgcore::RasterU8;

/// Random symmetry applied to each sample each time it is visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augment {
    None,
    /// Horizontal mirror with probability 1/2.
    Flip,
    /// One of the 8 symmetries of the square, uniformly.
    Dihedral,
}

impl Augment {
    pub fn as_str(self) -> &'static str {
        match self {
            Augment::None => "none",
            Augment::Flip => "flip",
            Augment::Dihedral => "dihedral",
        }
    }

    pub fn parse(s: &str) -> Option<Augment> {
        match s {
            "none" => Some(Augment::None),
            "flip" => Some(Augment::Flip),
            "dihedral" => Some(Augment::Dihedral),
            _ => None,
        }
    }

    fn variants(self) -> usize {
        match self {
            Augment::None => 1,
            Augment::Flip => 2,
            Augment::Dihedral => 8,
        }
    }
}

/// Source coordinates of output pixel `(x, y)` under symmetry `t` of an
/// `n x n` grid: bit 0 mirrors x, bit 1 mirrors y, bit 2 transposes first.
fn dihedral_source(t: usize, x: usize, y: usize, n: usize) -> (usize, usize) {
    let (mut a, mut b) = if t & 4 != 0 { (y, x) } else { (x, y) };
    if t & 1 != 0 {
        a = n - 1 - a;
    }
    if t & 2 != 0 {
        b = n - 1 - b;
    }
    (a, b)
}

/// Applies symmetry `t` (0..8, 0 is the identity) to a square image and its
/// square target together.
pub fn dihedral(image: &RasterU8, target: &Trimap, t: usize) -> Result<(RasterU8, Trimap)> {
    let (n, s) = (image.width(), target.width());
    if image.height() != n || target.height() != s {
        return Err(Error::DimensionMismatch("symmetries need square images and targets".into()));
    }
    let img = RasterU8::from_fn(n, n, image.channels(), |x, y, c| {
        let (a, b) = dihedral_source(t, x, y, n);
        image.get(a, b, c)
    })?;
    let labels = (0..s * s)
        .map(|i| {
            let (a, b) = dihedral_source(t, i % s, i / s, s);
            target.get(a, b)
        })
        .collect();
    Ok((img, Trimap::new(s, s, labels)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// L2 penalty coefficient added to the gradient as `weight_decay * param`.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
    pub augment: Augment,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 16,
            epochs: 20,
            rng_seed: 0,
            augment: Augment::Dihedral,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("train.learning_rate", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("train.momentum", "must be in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("train.weight_decay", "must be >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("train.batch_size", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossReport {
    /// Mean per-sample loss over each epoch, measured while training.
    pub epoch_loss: Vec<f64>,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

/// Minibatch SGD with momentum on the mean per-sample loss of each batch.
///
/// Samples are first put in canonical (video, frame) order, so the result
/// does not depend on the order they were passed in; each epoch then visits
/// them in a seeded shuffle, drawing each sample's symmetry from the same
/// stream when augmentation is on.
pub fn train(net: &SegNet, samples: &[Sample], config: &TrainConfig) -> Result<(SegNet, LossReport)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| (&samples[a].video, samples[a].frame, a).cmp(&(&samples[b].video, samples[b].frame, b)));
    let mut net = net.clone();
    let mut velocity = vec![0.0; net.param_count()];
    let mut grad = vec![0.0; net.param_count()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut report = LossReport::default();
    for epoch in 0..config.epochs {
        let mut visit = order.clone();
        visit.shuffle(&mut rng);
        let (mut total, mut pos, mut neg) = (0.0, 0, 0);
        for chunk in visit.chunks(config.batch_size) {
            let owned: Vec<(RasterU8, Trimap)> = if config.augment == Augment::None {
                Vec::new()
            } else {
                chunk
                    .iter()
                    .map(|&i| dihedral(&samples[i].image, &samples[i].target, rng.gen_range(0..config.augment.variants())))
                    .collect::<Result<_>>()?
            };
            let batch: Vec<_> = if owned.is_empty() {
                chunk.iter().map(|&i| (&samples[i].image, &samples[i].target)).collect()
            } else {
                owned.iter().map(|(img, t)| (img, t)).collect()
            };
            grad.fill(0.0);
            let (losses, counts) = net.accumulate_gradients(&batch, &mut grad)?;
            total += losses.iter().sum::<f64>();
            pos += counts.positive;
            neg += counts.negative;
            let scale = 1.0 / chunk.len() as f64;
            for ((p, v), g) in net.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v - config.learning_rate * (scale * g + config.weight_decay * *p);
                *p += *v;
            }
        }
        let mean = total / samples.len() as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.5}");
        report.epoch_loss.push(mean);
        report.positives.push(pos);
        report.negatives.push(neg);
    }
    if net.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("train.learning_rate", "training diverged to non-finite parameters"));
    }
    Ok((net, report))
}
