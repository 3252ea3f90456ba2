#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |_| r.sample::<f64, _>(StandardNormal))
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |_| r.random_range(lo..hi))
}

/// Isotropic Gaussian blobs around `centers`, `per_class` points each, in
/// class order.
pub fn blobs(centers: &[Vec<f64>], per_class: usize, sigma: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let d = centers[0].len();
    let n = centers.len() * per_class;
    let mut x = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for (k, c) in centers.iter().enumerate() {
        for i in 0..per_class {
            let row = k * per_class + i;
            for j in 0..d {
                x[[row, j]] = c[j] + sigma * r.sample::<f64, _>(StandardNormal);
            }
            labels.push(k);
        }
    }
    (x, labels)
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Sample covariance with divisor `T − 1`, formed explicitly.
pub fn covariance(x: &Array2<f64>) -> Array2<f64> {
    let (t, d) = x.dim();
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / t as f64).collect();
    Array2::from_shape_fn((d, d), |(a, b)| {
        (0..t).map(|i| (x[[i, a]] - mean[a]) * (x[[i, b]] - mean[b])).sum::<f64>() / (t - 1) as f64
    })
}
