use std::cmp::Ordering;

use super::features::SuperpixelFeature;
use crate::error::{Error, Result};
use crate::imgcore::chi_squared;

/// Relative weight of each distance component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphWeights {
    pub location: f64,
    pub color: f64,
    pub hog: f64,
}

impl Default for GraphWeights {
    fn default() -> Self {
        GraphWeights {
            location: 1.0,
            color: 1.0,
            hog: 1.0,
        }
    }
}

/// k-nearest-neighbor lists, sorted by ascending distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NNGraph {
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl NNGraph {
    /// Builds a graph from explicit adjacency; entries must not reference
    /// themselves or out-of-range nodes.
    pub fn from_neighbors(neighbors: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = neighbors.len();
        for (i, list) in neighbors.iter().enumerate() {
            if list.iter().any(|&(j, _)| j == i || j >= n) {
                return Err(Error::invalid("graph", format!("node {i} has an invalid neighbor")));
            }
        }
        Ok(NNGraph { neighbors })
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.neighbors[node]
    }
}

/// Raw (location, color, hog) distances between two superpixels.
fn components(a: &SuperpixelFeature, b: &SuperpixelFeature) -> [f64; 3] {
    let dl = ((a.centroid.0 - b.centroid.0).powi(2) + (a.centroid.1 - b.centroid.1).powi(2)).sqrt();
    let dc = chi_squared(&a.color_hist, &b.color_hist);
    let dh = a
        .hog
        .iter()
        .zip(&b.hog)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    [dl, dc, dh]
}

/// Standard deviation of each component over all unordered pairs; components
/// that never vary get scale 1.
fn component_scales(features: &[SuperpixelFeature]) -> [f64; 3] {
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    let mut m = 0usize;
    for i in 0..features.len() {
        for j in i + 1..features.len() {
            let c = components(&features[i], &features[j]);
            for k in 0..3 {
                sum[k] += c[k];
                sum_sq[k] += c[k] * c[k];
            }
            m += 1;
        }
    }
    std::array::from_fn(|k| {
        let mean = sum[k] / m as f64;
        let var = (sum_sq[k] / m as f64 - mean * mean).max(0.0);
        let sd = var.sqrt();
        if sd > 1e-12 {
            sd
        } else {
            1.0
        }
    })
}

fn by_distance_then_index(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Exact k nearest neighbors over all superpixels of a shot under
/// `w_loc*|dc| + w_color*chi2 + w_hog*|dhog|`, each component first divided by
/// its standard deviation across the shot. Ties break toward the lower index.
pub fn build_nn_graph(features: &[SuperpixelFeature], k: usize, weights: GraphWeights) -> Result<NNGraph> {
    if features.len() < 2 {
        return Err(Error::TooFewNodes {
            required: 2,
            got: features.len(),
        });
    }
    if k == 0 {
        return Err(Error::invalid("graph.k", "must be >= 1"));
    }
    let n = features.len();
    let k = k.min(n - 1);
    let scales = component_scales(features);
    let w = [weights.location, weights.color, weights.hog];
    let mut neighbors = Vec::with_capacity(n);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        for j in (0..n).filter(|&j| j != i) {
            let c = components(&features[i], &features[j]);
            let d = w[0] * c[0] / scales[0] + w[1] * c[1] / scales[1] + w[2] * c[2] / scales[2];
            row.push((j, d));
        }
        if k < row.len() {
            row.select_nth_unstable_by(k - 1, by_distance_then_index);
            row.truncate(k);
        }
        row.sort_by(by_distance_then_index);
        neighbors.push(row.clone());
    }
    Ok(NNGraph { neighbors })
}

/// Iterates `x <- (1 - damping) * x0 + damping * mean(x over neighbors)` for a
/// fixed number of rounds and clamps the result to `[0, 1]`.
pub fn propagate_saliency(graph: &NNGraph, initial: &[f64], iterations: usize, damping: f64) -> Result<Vec<f64>> {
    if initial.len() != graph.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} saliency values for {} graph nodes",
            initial.len(),
            graph.node_count()
        )));
    }
    if !(0.0..=1.0).contains(&damping) {
        return Err(Error::invalid("propagation.damping", format!("{damping} outside [0, 1]")));
    }
    if let Some(bad) = initial.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid("saliency", format!("{bad} outside [0, 1]")));
    }
    let mut x = initial.to_vec();
    let mut next = vec![0.0; x.len()];
    for _ in 0..iterations {
        for (i, out) in next.iter_mut().enumerate() {
            let nbrs = &graph.neighbors[i];
            // mean written relative to the first vote and the update relative to
            // x0 so that a constant vector is reproduced bit-exactly
            let vote = match nbrs.first() {
                None => x[i],
                Some(&(j0, _)) => {
                    let base = x[j0];
                    base + nbrs.iter().map(|&(j, _)| x[j] - base).sum::<f64>() / nbrs.len() as f64
                }
            };
            *out = initial[i] + damping * (vote - initial[i]);
        }
        std::mem::swap(&mut x, &mut next);
    }
    Ok(x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}
