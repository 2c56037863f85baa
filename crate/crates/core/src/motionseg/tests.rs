use super::*;
use crate::imgcore::HogParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn feature(x: f64, y: f64, hist: Vec<f64>, hog: Vec<f64>) -> SuperpixelFeature {
    SuperpixelFeature {
        centroid: (x, y),
        color_hist: hist,
        hog,
        frame_index: 0,
    }
}

fn random_features(n: usize, seed: u64) -> Vec<SuperpixelFeature> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut hist: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = hist.iter().sum();
            hist.iter_mut().for_each(|v| *v /= s);
            SuperpixelFeature {
                centroid: (rng.gen(), rng.gen()),
                color_hist: hist,
                hog: (0..5).map(|_| rng.gen::<f64>()).collect(),
                frame_index: i % 4,
            }
        })
        .collect()
}

/// Independent all-pairs oracle: full distance matrix, standard deviations
/// over the upper triangle, full sort per row.
fn brute_force(features: &[SuperpixelFeature], k: usize, w: [f64; 3]) -> Vec<Vec<(usize, f64)>> {
    let n = features.len();
    let raw = |a: &SuperpixelFeature, b: &SuperpixelFeature| -> [f64; 3] {
        let loc = ((a.centroid.0 - b.centroid.0).powi(2) + (a.centroid.1 - b.centroid.1).powi(2)).sqrt();
        let mut chi = 0.0;
        for (p, q) in a.color_hist.iter().zip(&b.color_hist) {
            if p + q > 0.0 {
                chi += (p - q).powi(2) / (p + q);
            }
        }
        let hog = a.hog.iter().zip(&b.hog).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        [loc, chi / 2.0, hog]
    };
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(raw(&features[i], &features[j]));
        }
    }
    let sd: Vec<f64> = (0..3)
        .map(|c| {
            let m = pairs.len() as f64;
            let mean = pairs.iter().map(|p| p[c]).sum::<f64>() / m;
            let var = pairs.iter().map(|p| (p[c] - mean).powi(2)).sum::<f64>() / m;
            if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 }
        })
        .collect();
    (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let r = raw(&features[i], &features[j]);
                    (j, (0..3).map(|c| w[c] * r[c] / sd[c]).sum())
                })
                .collect();
            row.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            row.truncate(k.min(n - 1));
            row
        })
        .collect()
}

fn assert_matches_oracle(features: &[SuperpixelFeature], k: usize, w: GraphWeights) {
    let g = build_nn_graph(features, k, w).unwrap();
    let oracle = brute_force(features, k, [w.location, w.color, w.hog]);
    for (i, expected) in oracle.iter().enumerate() {
        let got = g.neighbors(i);
        assert_eq!(got.len(), expected.len());
        for (a, b) in got.iter().zip(expected) {
            assert_eq!(a.0, b.0, "node {i}");
            assert!((a.1 - b.1).abs() < 1e-9);
        }
    }
}

#[test]
fn collinear_endpoints_pick_the_middle() {
    let h = vec![0.5, 0.5];
    let d = vec![0.1, 0.2];
    let f = vec![
        feature(0.0, 0.0, h.clone(), d.clone()),
        feature(0.4, 0.0, h.clone(), d.clone()),
        feature(1.0, 0.0, h, d),
    ];
    let g = build_nn_graph(&f, 1, GraphWeights::default()).unwrap();
    assert_eq!(g.neighbors(0)[0].0, 1);
    assert_eq!(g.neighbors(2)[0].0, 1);
    assert_eq!(g.neighbors(1)[0].0, 0);
}

#[test]
fn full_k_is_complete_graph() {
    let f = random_features(7, 3);
    let g = build_nn_graph(&f, 6, GraphWeights::default()).unwrap();
    for i in 0..7 {
        let mut ids: Vec<usize> = g.neighbors(i).iter().map(|p| p.0).collect();
        ids.sort();
        let expected: Vec<usize> = (0..7).filter(|&j| j != i).collect();
        assert_eq!(ids, expected);
    }
    // k larger than n - 1 is capped
    assert_eq!(build_nn_graph(&f, 50, GraphWeights::default()).unwrap(), g);
}

#[test]
fn random_features_match_brute_force() {
    assert_matches_oracle(&random_features(60, 11), 5, GraphWeights::default());
    assert_matches_oracle(&random_features(40, 12), 3, GraphWeights { location: 2.0, color: 0.0, hog: 0.5 });
}

#[test]
fn graph_structure_invariants() {
    let f = random_features(30, 5);
    let g = build_nn_graph(&f, 4, GraphWeights::default()).unwrap();
    for i in 0..g.node_count() {
        let n = g.neighbors(i);
        assert_eq!(n.len(), 4);
        assert!(n.iter().all(|&(j, _)| j != i));
        assert!(n.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}

#[test]
fn too_few_nodes_errors() {
    let f = random_features(1, 0);
    assert!(matches!(build_nn_graph(&f, 1, GraphWeights::default()), Err(Error::TooFewNodes { .. })));
    assert!(build_nn_graph(&random_features(3, 0), 0, GraphWeights::default()).is_err());
}

fn pair_graph() -> NNGraph {
    NNGraph::from_neighbors(vec![vec![(1, 1.0)], vec![(0, 1.0)]]).unwrap()
}

#[test]
fn propagation_hand_iterations() {
    let g = pair_graph();
    assert_eq!(propagate_saliency(&g, &[1.0, 0.0], 1, 1.0).unwrap(), vec![0.0, 1.0]);
    assert_eq!(propagate_saliency(&g, &[1.0, 0.0], 2, 1.0).unwrap(), vec![1.0, 0.0]);
}

#[test]
fn propagation_fixed_points() {
    let f = random_features(25, 9);
    let g = build_nn_graph(&f, 4, GraphWeights::default()).unwrap();
    for c in [0.0, 0.3, 0.7, 1.0] {
        let out = propagate_saliency(&g, &vec![c; 25], 10, 0.5).unwrap();
        assert!(out.iter().all(|&v| v == c));
    }
    let x0: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).fract()).collect();
    assert_eq!(propagate_saliency(&g, &x0, 10, 0.0).unwrap(), x0);
}

#[test]
fn propagation_errors() {
    let g = pair_graph();
    assert!(matches!(propagate_saliency(&g, &[0.5], 1, 0.5), Err(Error::DimensionMismatch(_))));
    assert!(propagate_saliency(&g, &[0.5, 0.5], 1, 1.5).is_err());
    assert!(propagate_saliency(&g, &[0.5, 1.5], 1, 0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn propagation_stays_bounded(
        seed in any::<u64>(),
        damping in 0.0f64..1.0,
        iterations in 0usize..20,
    ) {
        let f = random_features(20, seed);
        let g = build_nn_graph(&f, 3, GraphWeights::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let x0: Vec<f64> = (0..20).map(|_| rng.gen()).collect();
        let out = propagate_saliency(&g, &x0, iterations, damping).unwrap();
        let spread = x0.iter().cloned().fold(f64::MIN, f64::max) - x0.iter().cloned().fold(f64::MAX, f64::min);
        for (o, a) in out.iter().zip(&x0) {
            prop_assert!((0.0..=1.0).contains(o));
            prop_assert!((o - a).abs() <= damping * spread + 1e-12);
        }
    }

    #[test]
    fn small_graphs_match_brute_force(seed in any::<u64>(), n in 2usize..40, k in 1usize..10) {
        assert_matches_oracle(&random_features(n, seed), k, GraphWeights::default());
    }
}

#[test]
fn hog_params_default_len() {
    assert_eq!(FeatureParams::default().hog, HogParams::default());
}

#[test]
fn unlc_rejects_bad_inputs() {
    let f = RasterU8::filled(16, 16, 3, 0).unwrap();
    let flow = FlowField::constant(16, 16, 0.0, 0.0).unwrap();
    let cfg = UnlcConfig::default();
    assert!(unlc_segment(&[f.clone()], &[], &cfg).is_err());
    assert!(matches!(
        unlc_segment(&[f.clone(), f.clone()], &[flow.clone(), flow.clone()], &cfg),
        Err(Error::DimensionMismatch(_))
    ));
    let other = FlowField::constant(8, 16, 0.0, 0.0).unwrap();
    assert!(unlc_segment(&[f.clone(), f], &[other], &cfg).is_err());
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let recs = vec![
        SegmentRecord { video: "b".into(), frame_index: 1, shot: 0, prob_file: "p1.pgm".into(), frame_file: "f1.ppm".into() },
        SegmentRecord { video: "a".into(), frame_index: 3, shot: 1, prob_file: "p3.pgm".into(), frame_file: "f3.ppm".into() },
    ];
    let path = dir.path().join("manifest.tsv");
    write_segment_manifest(&path, &recs).unwrap();
    let back = read_segment_manifest(&path).unwrap();
    assert_eq!(back[0].video, "a");
    assert_eq!(back.len(), 2);
    assert!(back.contains(&recs[0]));
}
