//! Unsupervised motion segmentation to pseudo ground truth masks, dataset
//! generation from noisy masks, and a small convolutional mask predictor.

pub mod datasetgen;
pub mod error;
pub mod evalmetrics;
pub mod imgcore;
pub mod learner;
pub mod motionseg;
pub mod optflow;
pub mod shotprune;
pub mod superpixel;
pub mod synth;

pub use datasetgen::{JitterParams, Label, Sample, Trimap, TrimapParams};
pub use error::{Error, Result};
pub use evalmetrics::SegScore;
pub use imgcore::{BBox, BinaryMask, FloatRaster, ProbMap, RasterU8};
pub use learner::{LossReport, SegNet, TrainConfig};
pub use motionseg::{NNGraph, SaliencyParams, ShotSegmentation, SuperpixelFeature, UnlcConfig};
pub use optflow::{FlowField, FlowParams};
pub use shotprune::{PruneParams, Shot};
pub use superpixel::{SlicParams, SuperpixelLabeling};
