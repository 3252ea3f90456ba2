mod common;

use ccbr_core::classify::*;
use common::{accuracy, blobs, gaussian, rng};
use ndarray::{Array2, ArrayView2};
use rand::Rng;

/// Penalized multinomial cross-entropy, `(Σ_t −log p_t,y + ½‖W‖²/C) / T`, and
/// its gradient. Written independently of the library.
fn reference_loss(x: ArrayView2<f64>, labels: &[usize], k: usize, c: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let (t, p) = x.dim();
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    for i in 0..t {
        let z: Vec<f64> = (0..k)
            .map(|cl| theta[k * p + cl] + (0..p).map(|j| theta[cl * p + j] * x[[i, j]]).sum::<f64>())
            .collect();
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[labels[i]];
        for cl in 0..k {
            let r = (z[cl] - lse).exp() - if cl == labels[i] { 1.0 } else { 0.0 };
            for j in 0..p {
                grad[cl * p + j] += r * x[[i, j]];
            }
            grad[k * p + cl] += r;
        }
    }
    for i in 0..k * p {
        loss += 0.5 * theta[i] * theta[i] / c;
        grad[i] += theta[i] / c;
    }
    grad.iter_mut().for_each(|g| *g /= t as f64);
    (loss / t as f64, grad)
}

/// Steepest descent with Armijo backtracking.
fn reference_descent(x: ArrayView2<f64>, labels: &[usize], k: usize, c: f64) -> Vec<f64> {
    let n = k * (x.ncols() + 1);
    let mut theta = vec![0.0; n];
    let mut step = 1.0;
    for _ in 0..100_000 {
        let (f, g) = reference_loss(x, labels, k, c, &theta);
        let gg: f64 = g.iter().map(|v| v * v).sum();
        if gg.sqrt() < 1e-10 {
            break;
        }
        step *= 2.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            if reference_loss(x, labels, k, c, &cand).0 <= f - 1e-4 * step * gg {
                theta = cand;
                break;
            }
            step *= 0.5;
        }
    }
    theta
}

fn flatten(m: &LinearProbModel) -> Vec<f64> {
    m.weights.iter().copied().chain(m.biases.iter().copied()).collect()
}

fn small_instance() -> (Array2<f64>, Vec<usize>) {
    let (x, labels) = blobs(&[vec![0.0, 0.0], vec![2.0, 0.5], vec![0.5, 2.0]], 14, 1.0, 5);
    let keep = 40;
    (x.slice(ndarray::s![..keep, ..]).to_owned(), labels[..keep].to_vec())
}

#[test]
fn logistic_optimum_matches_independent_descent() {
    let (x, labels) = small_instance();
    let model = logistic_fit(x.view(), &labels, 3, 1.0).unwrap();
    let reference = reference_descent(x.view(), &labels, 3, 1.0);
    let ours = reference_loss(x.view(), &labels, 3, 1.0, &flatten(&model)).0;
    let theirs = reference_loss(x.view(), &labels, 3, 1.0, &reference).0;
    assert!((ours - theirs).abs() <= 1e-4, "{ours} vs {theirs}");
}

#[test]
fn logistic_gradient_vanishes_at_optimum_by_finite_differences() {
    let (x, labels) = small_instance();
    let model = logistic_fit(x.view(), &labels, 3, 1.0).unwrap();
    let theta = flatten(&model);
    let h = 1e-6;
    let mut g = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let mut up = theta.clone();
        let mut down = theta.clone();
        up[i] += h;
        down[i] -= h;
        let fd = (logistic_objective(x.view(), &labels, 3, 1.0, &up, &mut g)
            - logistic_objective(x.view(), &labels, 3, 1.0, &down, &mut g))
            / (2.0 * h);
        assert!(fd.abs() <= 1e-5, "coordinate {i}: {fd:e}");
    }
}

#[test]
fn logistic_gradient_matches_finite_differences_anywhere() {
    let x = gaussian(50, 4, 8);
    let labels: Vec<usize> = (0..50).map(|i| i % 5).collect();
    let mut r = rng(9);
    let theta: Vec<f64> = (0..25).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut g = vec![0.0; 25];
    logistic_objective(x.view(), &labels, 5, 0.7, &theta, &mut g);
    let (_, expected) = reference_loss(x.view(), &labels, 5, 0.7, &theta);
    let mut scratch = vec![0.0; 25];
    for i in 0..25 {
        let h = 1e-6;
        let mut up = theta.clone();
        let mut down = theta.clone();
        up[i] += h;
        down[i] -= h;
        let fd = (logistic_objective(x.view(), &labels, 5, 0.7, &up, &mut scratch)
            - logistic_objective(x.view(), &labels, 5, 0.7, &down, &mut scratch))
            / (2.0 * h);
        assert!((fd - g[i]).abs() <= 1e-4 * g[i].abs().max(1e-3), "coordinate {i}");
        assert!((expected[i] - g[i]).abs() <= 1e-12);
    }
}

#[test]
fn random_labels_stay_at_chance() {
    let x = gaussian(6000, 3, 12);
    let mut r = rng(13);
    let labels: Vec<usize> = (0..6000).map(|_| r.random_range(0..4)).collect();
    let model = logistic_fit(x.slice(ndarray::s![..3000, ..]), &labels[..3000], 4, 1.0).unwrap();
    let pred = model.predict(x.slice(ndarray::s![3000.., ..])).unwrap();
    let acc = accuracy(&pred, &labels[3000..]);
    assert!((acc - 0.25).abs() <= 0.05, "accuracy {acc}");
}

fn separable() -> (Array2<f64>, Vec<usize>, Array2<f64>, Vec<usize>) {
    let centers = vec![vec![0.0, 0.0, 0.0], vec![6.0, 0.0, 1.0], vec![0.0, 6.0, -1.0], vec![6.0, 6.0, 0.0]];
    let (x, y) = blobs(&centers, 100, 1.0, 17);
    let (xt, yt) = blobs(&centers, 100, 1.0, 18);
    (x, y, xt, yt)
}

#[test]
fn svm_and_logistic_agree_on_separable_data() {
    let (x, y, xt, _) = separable();
    let a = logistic_fit(x.view(), &y, 4, 1.0).unwrap().predict(xt.view()).unwrap();
    let b = svm_platt_fit(x.view(), &y, 4, 1.0).unwrap().predict(xt.view()).unwrap();
    assert!(accuracy(&a, &b) >= 0.95);
}

#[test]
fn kmeans_recovers_blob_means() {
    let sigma = 1.0;
    let (x, _) = blobs(&[vec![0.0, 0.0], vec![10.0, 0.0]], 200, sigma, 23);
    let model = kmeans_fit(x.view(), 2, Metric::L2, 4).unwrap();
    let truth = [[0.0, 0.0], [10.0, 0.0]];
    let err = |perm: [usize; 2]| -> f64 {
        (0..2)
            .map(|k| {
                let c = model.centroids.row(perm[k]);
                ((c[0] - truth[k][0]).powi(2) + (c[1] - truth[k][1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    };
    assert!(err([0, 1]).min(err([1, 0])) <= 0.5 * sigma);
}

#[test]
fn full_coverage_windows_classify_disjoint_ranges() {
    let mut r = rng(29);
    let n = 90;
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let x = Array2::from_shape_fn((n, 1), |(i, _)| 10.0 * labels[i] as f64 + r.random_range(0.0..5.0));
    let model = window_fit(x.view(), &labels, 3, 1.0).unwrap();
    assert_eq!(accuracy(&model.predict(x.view()).unwrap(), &labels), 1.0);
}

#[test]
fn oblique_stump_beats_axis_stump_on_diagonal_boundary() {
    let x = common::uniform(400, 2, -1.0, 1.0, 31);
    let labels: Vec<usize> = x.rows().into_iter().map(|r| usize::from(r[0] + r[1] > 0.0)).collect();
    let axis = tree_fit(x.view(), &labels, 2, TreeKind::Axis, 1, 1).unwrap();
    let oblique = tree_fit(x.view(), &labels, 2, TreeKind::Oblique, 1, 1).unwrap();
    let acc_axis = accuracy(&axis.predict(x.view()).unwrap(), &labels);
    let acc_oblique = accuracy(&oblique.predict(x.view()).unwrap(), &labels);
    assert!(acc_oblique >= acc_axis, "{acc_oblique} < {acc_axis}");
}

#[test]
fn quantization_sweep_endpoints() {
    let (x, y, xt, yt) = separable();
    let model = logistic_fit(x.view(), &y, 4, 1.0).unwrap();
    let full = model.predict(xt.view()).unwrap();
    let at = |bits| accuracy(&quantize_weights(&model, bits).unwrap().predict(xt.view()).unwrap(), &yt);
    assert!(at(16) >= at(2));

    // margins above 1e-4 survive 24-bit weights
    let scores = model.decision_function(xt.view()).unwrap();
    let q24 = quantize_weights(&model, 24).unwrap().predict(xt.view()).unwrap();
    for (i, row) in scores.rows().into_iter().enumerate() {
        let mut s = row.to_vec();
        s.sort_by(|a, b| b.total_cmp(a));
        if s[0] - s[1] > 1e-4 {
            assert_eq!(q24[i], full[i]);
        }
    }
}

#[test]
fn pruning_a_third_keeps_accuracy() {
    let (x, y, xt, yt) = separable();
    let model = logistic_fit(x.view(), &y, 4, 1.0).unwrap();
    let base = accuracy(&model.predict(xt.view()).unwrap(), &yt);
    let (pruned, report) = prune_weights(&model, 0.3).unwrap();
    let acc = accuracy(&pruned.predict(xt.view()).unwrap(), &yt);
    assert!(base - acc <= 0.05, "{base} -> {acc}");
    assert!((report.achieved - 0.3).abs() <= 1.0 / report.total as f64);
}
