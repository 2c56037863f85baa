//! Flat `key = value` pipeline configuration with dotted section prefixes.
//!
//! Blank lines and `#` comments are ignored. Every key has a default; unknown
//! keys are rejected.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use moveseg_core::datasetgen::{DatasetParams, Degradation, Side};
use moveseg_core::learner::{Architecture, Augment, TrainConfig};
use moveseg_core::motionseg::UnlcConfig;
use moveseg_core::optflow::FlowParams;
use moveseg_core::shotprune::{PruneParams, ShotParams};
use moveseg_core::superpixel::SlicColorSpace;
use moveseg_core::synth::VideoSpec;
use moveseg_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegradeMode {
    None,
    Boundary,
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradeConfig {
    pub mode: DegradeMode,
    pub kernel_size: usize,
    pub fraction: f64,
    /// `None` draws the side from the sample seed.
    pub side: Option<Side>,
}

impl DegradeConfig {
    pub fn degradation(&self) -> Degradation {
        match self.mode {
            DegradeMode::None => Degradation::None,
            DegradeMode::Boundary => Degradation::Boundary { kernel_size: self.kernel_size },
            DegradeMode::Truncate => Degradation::Truncate { area_fraction: self.fraction, side: self.side },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub videos: usize,
    pub video: VideoSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub flow: FlowParams,
    pub unlc: UnlcConfig,
    pub shots: ShotParams,
    pub prune: PruneParams,
    pub dataset: DatasetParams,
    pub degrade: DegradeConfig,
    /// Fraction of the dataset kept for training.
    pub subsample: f64,
    pub arch: Architecture,
    pub train: TrainConfig,
    pub eval_threshold: f64,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            workers: 0,
            flow: FlowParams::default(),
            unlc: UnlcConfig::default(),
            shots: ShotParams::default(),
            prune: PruneParams::default(),
            dataset: DatasetParams::default(),
            degrade: DegradeConfig {
                mode: DegradeMode::None,
                kernel_size: 5,
                fraction: 0.25,
                side: None,
            },
            subsample: 1.0,
            arch: Architecture::default(),
            train: TrainConfig::default(),
            eval_threshold: 0.5,
            synth: SynthConfig {
                videos: 2,
                video: VideoSpec::default(),
            },
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse {value:?}")))
}

impl PipelineConfig {
    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let u = &self.unlc;
        let d = &self.dataset;
        let t = &self.train;
        let v = &self.synth.video;
        vec![
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("flow.pyramid_levels", self.flow.pyramid_levels.to_string()),
            ("flow.iterations_per_level", self.flow.iterations_per_level.to_string()),
            ("flow.window_radius", self.flow.window_radius.to_string()),
            ("slic.target_regions", u.slic.target_regions.to_string()),
            ("slic.compactness", u.slic.compactness.to_string()),
            ("slic.iterations", u.slic.iterations.to_string()),
            (
                "slic.color_space",
                match u.slic.color_space {
                    SlicColorSpace::Lab => "lab",
                    SlicColorSpace::Rgb => "rgb",
                }
                .to_string(),
            ),
            ("saliency.static_motion_threshold", u.saliency.static_motion_threshold.to_string()),
            ("saliency.static_frame_fraction", u.saliency.static_frame_fraction.to_string()),
            ("saliency.angle_bins", u.saliency.angle_bins.to_string()),
            ("features.hist_bins", u.features.hist_bins.to_string()),
            ("features.hog_cells", u.features.hog.cells.to_string()),
            ("features.hog_orientations", u.features.hog.orientations.to_string()),
            ("graph.k", u.k.to_string()),
            ("graph.w_loc", u.weights.location.to_string()),
            ("graph.w_color", u.weights.color.to_string()),
            ("graph.w_hog", u.weights.hog.to_string()),
            ("graph.iterations", u.iterations.to_string()),
            ("graph.damping", u.damping.to_string()),
            ("shots.hist_bins", self.shots.hist_bins.to_string()),
            ("shots.cut_threshold", self.shots.cut_threshold.to_string()),
            ("prune.max_fg_fraction", self.prune.max_fg_fraction.to_string()),
            ("prune.min_fg_fraction", self.prune.min_fg_fraction.to_string()),
            ("prune.border_band_fraction", self.prune.border_band_fraction.to_string()),
            ("prune.max_border_fg_fraction", self.prune.max_border_fg_fraction.to_string()),
            ("prune.binarize_threshold", self.prune.binarize_threshold.to_string()),
            ("jitter.scale_min", d.jitter.scale_range.0.to_string()),
            ("jitter.scale_max", d.jitter.scale_range.1.to_string()),
            ("jitter.translate_range", d.jitter.translate_range.to_string()),
            ("jitter.context_pad", d.jitter.context_pad.to_string()),
            ("jitter.object_threshold", d.jitter.object_threshold.to_string()),
            ("trimap.neg_threshold", d.trimap.neg_threshold.to_string()),
            ("trimap.pos_threshold", d.trimap.pos_threshold.to_string()),
            ("dataset.w", d.w.to_string()),
            ("dataset.s", d.s.to_string()),
            ("dataset.mask_threshold", d.mask_threshold.to_string()),
            ("dataset.subsample", self.subsample.to_string()),
            (
                "degrade.mode",
                match self.degrade.mode {
                    DegradeMode::None => "none",
                    DegradeMode::Boundary => "boundary",
                    DegradeMode::Truncate => "truncate",
                }
                .to_string(),
            ),
            ("degrade.kernel_size", self.degrade.kernel_size.to_string()),
            ("degrade.fraction", self.degrade.fraction.to_string()),
            (
                "degrade.side",
                match self.degrade.side {
                    None => "random",
                    Some(Side::Left) => "left",
                    Some(Side::Right) => "right",
                    Some(Side::Top) => "top",
                    Some(Side::Bottom) => "bottom",
                }
                .to_string(),
            ),
            ("learner.arch", self.arch.to_string()),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.momentum", t.momentum.to_string()),
            ("train.weight_decay", t.weight_decay.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.augment", t.augment.as_str().to_string()),
            ("eval.threshold", self.eval_threshold.to_string()),
            ("synth.videos", self.synth.videos.to_string()),
            ("synth.width", v.width.to_string()),
            ("synth.height", v.height.to_string()),
            ("synth.frames", v.frames.to_string()),
            ("synth.square_side", v.square_side.to_string()),
            ("synth.speed", v.speed.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let u = &mut self.unlc;
        let d = &mut self.dataset;
        let t = &mut self.train;
        let v = &mut self.synth.video;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "flow.pyramid_levels" => self.flow.pyramid_levels = parse(key, value)?,
            "flow.iterations_per_level" => self.flow.iterations_per_level = parse(key, value)?,
            "flow.window_radius" => self.flow.window_radius = parse(key, value)?,
            "slic.target_regions" => u.slic.target_regions = parse(key, value)?,
            "slic.compactness" => u.slic.compactness = parse(key, value)?,
            "slic.iterations" => u.slic.iterations = parse(key, value)?,
            "slic.color_space" => {
                u.slic.color_space = match value {
                    "lab" => SlicColorSpace::Lab,
                    "rgb" => SlicColorSpace::Rgb,
                    _ => return Err(Error::invalid(key, "expected `lab` or `rgb`")),
                }
            }
            "saliency.static_motion_threshold" => u.saliency.static_motion_threshold = parse(key, value)?,
            "saliency.static_frame_fraction" => u.saliency.static_frame_fraction = parse(key, value)?,
            "saliency.angle_bins" => u.saliency.angle_bins = parse(key, value)?,
            "features.hist_bins" => u.features.hist_bins = parse(key, value)?,
            "features.hog_cells" => u.features.hog.cells = parse(key, value)?,
            "features.hog_orientations" => u.features.hog.orientations = parse(key, value)?,
            "graph.k" => u.k = parse(key, value)?,
            "graph.w_loc" => u.weights.location = parse(key, value)?,
            "graph.w_color" => u.weights.color = parse(key, value)?,
            "graph.w_hog" => u.weights.hog = parse(key, value)?,
            "graph.iterations" => u.iterations = parse(key, value)?,
            "graph.damping" => u.damping = parse(key, value)?,
            "shots.hist_bins" => self.shots.hist_bins = parse(key, value)?,
            "shots.cut_threshold" => self.shots.cut_threshold = parse(key, value)?,
            "prune.max_fg_fraction" => self.prune.max_fg_fraction = parse(key, value)?,
            "prune.min_fg_fraction" => self.prune.min_fg_fraction = parse(key, value)?,
            "prune.border_band_fraction" => self.prune.border_band_fraction = parse(key, value)?,
            "prune.max_border_fg_fraction" => self.prune.max_border_fg_fraction = parse(key, value)?,
            "prune.binarize_threshold" => self.prune.binarize_threshold = parse(key, value)?,
            "jitter.scale_min" => d.jitter.scale_range.0 = parse(key, value)?,
            "jitter.scale_max" => d.jitter.scale_range.1 = parse(key, value)?,
            "jitter.translate_range" => d.jitter.translate_range = parse(key, value)?,
            "jitter.context_pad" => d.jitter.context_pad = parse(key, value)?,
            "jitter.object_threshold" => d.jitter.object_threshold = parse(key, value)?,
            "trimap.neg_threshold" => d.trimap.neg_threshold = parse(key, value)?,
            "trimap.pos_threshold" => d.trimap.pos_threshold = parse(key, value)?,
            "dataset.w" => d.w = parse(key, value)?,
            "dataset.s" => d.s = parse(key, value)?,
            "dataset.mask_threshold" => d.mask_threshold = parse(key, value)?,
            "dataset.subsample" => self.subsample = parse(key, value)?,
            "degrade.mode" => {
                self.degrade.mode = match value {
                    "none" => DegradeMode::None,
                    "boundary" => DegradeMode::Boundary,
                    "truncate" => DegradeMode::Truncate,
                    _ => return Err(Error::invalid(key, "expected `none`, `boundary` or `truncate`")),
                }
            }
            "degrade.kernel_size" => self.degrade.kernel_size = parse(key, value)?,
            "degrade.fraction" => self.degrade.fraction = parse(key, value)?,
            "degrade.side" => {
                self.degrade.side = match value {
                    "random" => None,
                    other => Some(Side::parse(other).ok_or_else(|| {
                        Error::invalid(key, "expected `random`, `left`, `right`, `top` or `bottom`")
                    })?),
                }
            }
            "learner.arch" => self.arch = value.parse()?,
            "train.learning_rate" => t.learning_rate = parse(key, value)?,
            "train.momentum" => t.momentum = parse(key, value)?,
            "train.weight_decay" => t.weight_decay = parse(key, value)?,
            "train.batch_size" => t.batch_size = parse(key, value)?,
            "train.epochs" => t.epochs = parse(key, value)?,
            "train.augment" => {
                t.augment = Augment::parse(value)
                    .ok_or_else(|| Error::invalid(key, "expected `none`, `flip` or `dihedral`"))?
            }
            "eval.threshold" => self.eval_threshold = parse(key, value)?,
            "synth.videos" => self.synth.videos = parse(key, value)?,
            "synth.width" => v.width = parse(key, value)?,
            "synth.height" => v.height = parse(key, value)?,
            "synth.frames" => v.frames = parse(key, value)?,
            "synth.square_side" => v.square_side = parse(key, value)?,
            "synth.speed" => v.speed = parse(key, value)?,
            _ => return Err(Error::invalid(key, "unknown configuration key")),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}", n + 1), format!("expected `key = value`, got {line:?}")))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        Self::parse_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        self.unlc.saliency.validate()?;
        if self.unlc.slic.target_regions == 0 {
            return Err(Error::invalid("slic.target_regions", "must be >= 1"));
        }
        if !(self.unlc.slic.compactness > 0.0) {
            return Err(Error::invalid("slic.compactness", "must be > 0"));
        }
        if self.unlc.features.hist_bins == 0 || self.unlc.features.hist_bins > 256 {
            return Err(Error::invalid("features.hist_bins", "must be in 1..=256"));
        }
        if self.unlc.features.hog.cells == 0 || self.unlc.features.hog.orientations == 0 {
            return Err(Error::invalid("features.hog_cells", "HOG cells and orientations must be >= 1"));
        }
        if self.unlc.k == 0 {
            return Err(Error::invalid("graph.k", "must be >= 1"));
        }
        let w = self.unlc.weights;
        if [w.location, w.color, w.hog].iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::invalid("graph.w_loc", "graph weights must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.unlc.damping) {
            return Err(Error::invalid("graph.damping", "must be in [0, 1]"));
        }
        self.shots.validate()?;
        self.prune.validate()?;
        self.dataset_params().validate()?;
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("dataset.subsample", "must be in (0, 1]"));
        }
        if self.arch.0.is_empty() {
            return Err(Error::invalid("learner.arch", "needs at least one layer"));
        }
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.eval_threshold) {
            return Err(Error::invalid("eval.threshold", "must be in [0, 1]"));
        }
        let v = &self.synth.video;
        if v.frames < 2 || v.square_side == 0 || v.square_side > v.width.min(v.height) {
            return Err(Error::invalid("synth.square_side", "need >= 2 frames and a square that fits the frame"));
        }
        Ok(())
    }

    /// Dataset settings with the configured label degradation.
    pub fn dataset_params(&self) -> DatasetParams {
        DatasetParams { degradation: self.degrade.degradation(), ..self.dataset }
    }

    /// Training settings with the run seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { rng_seed: self.seed, ..self.train }
    }
}
