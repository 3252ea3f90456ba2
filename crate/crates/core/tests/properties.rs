mod common;

use std::collections::BTreeMap;

use ccbr_core::classify::*;
use ccbr_core::data::{make_folds, ContinuousSignal, NeuralDataset, SpikeEvent};
use ccbr_core::decode::{quantizer_encode, quantizer_fit, r_squared};
use ccbr_core::features::*;
use ccbr_core::reduce::{pca_fit, pca_transform, PcSelector};
use common::{blobs, gaussian};
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;

fn fitted_backends(seed: u64) -> Vec<Classifier> {
    let centers = vec![vec![0.0, 0.0, 1.0], vec![3.0, -1.0, 0.0], vec![-2.0, 2.5, 0.5]];
    let (x, y) = blobs(&centers, 30, 1.2, seed);
    let specs = [
        ClassifierSpec::Logistic { c: 1.0 },
        ClassifierSpec::SvmPlatt { c: 1.0 },
        ClassifierSpec::Centroid { metric: Metric::L1, temperature: None },
        ClassifierSpec::Window { coverage: 0.9 },
        ClassifierSpec::Tree { tree: TreeKind::Oblique, max_depth: 3, min_leaf: 2 },
    ];
    specs.iter().map(|s| s.fit(x.view(), &y, 3).unwrap()).collect()
}

fn random_tree(depth: usize, n_features: usize, choices: &[f64]) -> TreeModel {
    let mut nodes = Vec::new();
    let mut cursor = 0;
    let mut next = || {
        cursor += 1;
        choices[cursor % choices.len()]
    };
    fn grow(nodes: &mut Vec<Node>, depth: usize, d: usize, next: &mut dyn FnMut() -> f64) -> usize {
        let id = nodes.len();
        if depth == 0 || next() > 0.6 {
            let a = next().abs() + 0.1;
            nodes.push(Node::Leaf { probs: vec![a / (a + 1.0), 1.0 / (a + 1.0)] });
            return id;
        }
        let test = if next() > 0.0 {
            SplitTest::Axis { feature: (next().abs() * 1000.0) as usize % d, threshold: next() }
        } else {
            SplitTest::Oblique { weights: (0..d).map(|_| next()).collect(), threshold: next() }
        };
        nodes.push(Node::Leaf { probs: vec![] });
        let left = grow(nodes, depth - 1, d, next);
        let right = grow(nodes, depth - 1, d, next);
        nodes[id] = Node::Split { test, left, right };
        id
    }
    grow(&mut nodes, depth, n_features, &mut next);
    TreeModel { nodes, n_classes: 2, n_features, kind: TreeKind::Oblique, max_depth: depth, min_leaf: 1 }
}

/// Root-to-leaf walk that evaluates split tests by hand.
fn walk(tree: &TreeModel, x: &[f64]) -> Vec<f64> {
    let mut i = 0;
    loop {
        match &tree.nodes[i] {
            Node::Leaf { probs } => return probs.clone(),
            Node::Split { test, left, right } => {
                let value = match test {
                    SplitTest::Axis { feature, .. } => x[*feature],
                    SplitTest::Oblique { weights, .. } => weights.iter().zip(x).map(|(w, v)| w * v).sum(),
                };
                let threshold = match test {
                    SplitTest::Axis { threshold, .. } | SplitTest::Oblique { threshold, .. } => *threshold,
                };
                i = if value <= threshold { *left } else { *right };
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_backend_returns_probability_vectors(
        seed in 0u64..4,
        row in prop::collection::vec(-1e3f64..1e3, 3),
        scale in prop::sample::select(vec![1e-6, 1.0, 1e4]),
    ) {
        let x: Vec<f64> = row.iter().map(|v| v * scale).collect();
        for model in fitted_backends(seed) {
            let mut p = vec![0.0; 3];
            model.proba_row(&x, &mut p);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn temperature_never_changes_centroid_decision(
        row in prop::collection::vec(-50f64..50.0, 3),
        temperature in 1e-3f64..1e3,
        metric in prop::sample::select(vec![Metric::L1, Metric::L2, Metric::Cosine]),
    ) {
        let centers = vec![vec![0.0, 1.0, 2.0], vec![5.0, -3.0, 1.0], vec![-4.0, -4.0, 7.0], vec![1.0, 8.0, -2.0]];
        let (x, y) = blobs(&centers, 10, 1.0, 3);
        let model = centroid_fit(x.view(), &y, 4, metric, Some(temperature)).unwrap();
        let mut p = vec![0.0; 4];
        model.proba_row(&row, &mut p);
        let d = model.distances(&row);
        let best = d[argmax(&p)];
        prop_assert!(d.iter().all(|&v| best <= v));
        prop_assert_eq!(argmax(&p), model.nearest(&row));
    }

    #[test]
    fn tree_prediction_matches_hand_traversal(
        choices in prop::collection::vec(-2f64..2.0, 16..64),
        depth in 1usize..6,
        x in prop::collection::vec(-3f64..3.0, 4),
    ) {
        let tree = random_tree(depth, 4, &choices);
        let mut p = vec![0.0; 2];
        tree.proba_row(&x, &mut p);
        prop_assert_eq!(p, walk(&tree, &x));
    }

    #[test]
    fn compression_is_idempotent(bits in 2u32..=24, sparsity in 0.0f64..0.95, seed in 0u64..4) {
        let (x, y) = blobs(&[vec![0.0, 0.0], vec![3.0, 1.0], vec![1.0, 4.0]], 20, 1.0, seed);
        let model = logistic_fit(x.view(), &y, 3, 1.0).unwrap();
        let q = quantize_weights(&model, bits).unwrap();
        prop_assert_eq!(&quantize_weights(&q, bits).unwrap(), &q);
        let (pruned, _) = prune_weights(&model, sparsity).unwrap();
        prop_assert_eq!(&prune_weights(&pruned, sparsity).unwrap().0, &pruned);
    }

    #[test]
    fn spike_binning_conserves_events(
        times in prop::collection::vec((0usize..5, 0f64..10.0), 0..300),
        bin_width in 0.01f64..1.5,
    ) {
        let spikes: Vec<SpikeEvent> = times.iter().map(|&(unit, time)| SpikeEvent { unit, time }).collect();
        let ds = NeuralDataset {
            spike_events: Some(spikes.clone()),
            n_units: 5,
            continuous: None,
            kinematics: Array2::zeros((100, 1)),
            kin_rate_hz: 10.0,
            duration: 10.0,
            metadata: BTreeMap::new(),
        };
        let counts = bin_spike_counts(&ds, bin_width).unwrap();
        let covered = counts.nrows() as f64 * bin_width;
        let expected = spikes.iter().filter(|s| s.time < covered).count();
        prop_assert_eq!(counts.sum() as usize, expected);
    }

    #[test]
    fn band_power_scales_quadratically(alpha in 0.01f64..100.0, seed in 0u64..8) {
        let samples = gaussian(2, 4000, seed);
        let signal = ContinuousSignal { samples: samples.clone(), rate_hz: 8000.0 };
        let scaled = ContinuousSignal { samples: samples * alpha, rate_hz: 8000.0 };
        let p = spiking_band_power(&signal, SPIKING_BAND_HZ, 0.05).unwrap();
        let q = spiking_band_power(&scaled, SPIKING_BAND_HZ, 0.05).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!(*a >= 0.0);
            prop_assert!((b - alpha * alpha * a).abs() <= 1e-6 * (alpha * alpha * a).max(1e-300));
        }
    }

    #[test]
    fn crossings_are_scale_invariant(alpha in 0.01f64..100.0, seed in 0u64..8) {
        let x = gaussian(1, 3000, seed).row(0).to_vec();
        let y: Vec<f64> = x.iter().map(|v| v * alpha).collect();
        let fixed = threshold_crossings(&x, -2.0, Polarity::Negative, 3.0);
        prop_assert_eq!(&threshold_crossings(&y, -2.0 * alpha, Polarity::Negative, 3.0), &fixed);
        let signal = |s: &Vec<f64>| ContinuousSignal { samples: Array2::from_shape_vec((1, s.len()), s.clone()).unwrap(), rate_hz: 1000.0 };
        let cfg = ThresholdConfig::robust(3.5, 0.002);
        prop_assert_eq!(
            threshold_crossing_rate(&signal(&x), &cfg, 0.1).unwrap(),
            threshold_crossing_rate(&signal(&y), &cfg, 0.1).unwrap()
        );
    }

    #[test]
    fn lag_embedding_reproduces_windows(rows in 4usize..30, cols in 1usize..4, before in 0usize..3, after in 0usize..3, seed in 0u64..50) {
        prop_assume!(before + after < rows);
        let base = gaussian(rows, cols, seed);
        let fm = lag_embed(base.view(), before, after, 0.1, SourceKind::BandPower).unwrap();
        prop_assert_eq!(fm.n_rows(), rows - before - after);
        for i in 0..fm.n_rows() {
            let expected: Vec<f64> = (i..=i + before + after).flat_map(|t| base.row(t).to_vec()).collect();
            prop_assert_eq!(fm.values.row(i).to_vec(), expected);
        }
    }

    #[test]
    fn pca_reconstruction_error_shrinks_with_more_components(seed in 0u64..30) {
        let x = gaussian(40, 6, seed);
        let mut last = f64::INFINITY;
        for p in 1..=6 {
            let model = pca_fit(x.view(), PcSelector::Fixed(p)).unwrap();
            let rec = model.inverse_transform(pca_transform(&model, x.view()).unwrap().view()).unwrap();
            let err = (&x - &rec).mapv(|v| v * v).sum();
            prop_assert!(err <= last + 1e-9);
            last = err;
        }
        prop_assert!(last <= 1e-12 * x.mapv(|v| v * v).sum());
    }

    #[test]
    fn pca_transform_commutes_with_row_permutation(seed in 0u64..30, shift in 1usize..39) {
        let x = gaussian(40, 5, seed);
        let model = pca_fit(x.view(), PcSelector::Fixed(3)).unwrap();
        let order: Vec<usize> = (0..40).map(|i| (i + shift) % 40).collect();
        let a = pca_transform(&model, x.select(Axis(0), &order).view()).unwrap();
        let b = pca_transform(&model, x.view()).unwrap().select(Axis(0), &order);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn full_pca_on_standardized_data_keeps_total_variance(seed in 0u64..30) {
        let x = gaussian(50, 7, seed);
        let z = StandardizerModel::fit(x.view()).unwrap().apply(x.view()).unwrap();
        let model = pca_fit(z.view(), PcSelector::Fixed(7)).unwrap();
        let trace: f64 = common::covariance(&z).diag().sum();
        prop_assert!((model.explained_variance.iter().sum::<f64>() - trace).abs() <= 1e-6);
        let c = model.components.t().dot(&model.components);
        for ((i, j), v) in c.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            prop_assert!((v - target).abs() <= 1e-6);
        }
    }

    #[test]
    fn encoded_values_sit_within_half_a_bin(values in prop::collection::vec(-100f64..100.0, 20..200), levels in 2usize..64) {
        let y = Array1::from(values);
        prop_assume!({ let mut d = y.to_vec(); d.sort_by(f64::total_cmp); d.dedup(); d.len() >= levels });
        let q = quantizer_fit(y.view(), levels).unwrap();
        let bound = (q.input_range.1 - q.input_range.0) / (2.0 * levels as f64);
        for (v, l) in y.iter().zip(quantizer_encode(&q, y.view())) {
            prop_assert!((v - q.centers[l]).abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fold_test_blocks_partition_the_timeline(n_bins in 40usize..2000, n_folds in 2usize..12, val in 0.02f64..0.3) {
        let folds = make_folds(n_bins, n_folds, val);
        prop_assume!(folds.is_ok());
        let folds = folds.unwrap();
        let mut covered: Vec<usize> = folds.iter().flat_map(|f| f.test_indices()).collect();
        covered.sort_unstable();
        prop_assert_eq!(covered, (0..n_bins).collect::<Vec<_>>());
        for f in &folds {
            let mut all: Vec<usize> = f.train_indices();
            all.extend(f.validation_indices());
            all.extend(f.test_indices());
            all.sort_unstable();
            prop_assert_eq!(all, (0..n_bins).collect::<Vec<_>>());
            prop_assert!(!f.validation.is_empty() && !f.test.is_empty());
        }
    }

    #[test]
    fn perfect_predictions_score_one(values in prop::collection::vec(-10f64..10.0, 3..50)) {
        let y = Array2::from_shape_vec((values.len(), 1), values).unwrap();
        prop_assume!(y.iter().any(|&v| v != y[[0, 0]]));
        prop_assert_eq!(r_squared(y.view(), y.view()).unwrap().mean, 1.0);
    }
}
