use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{class_counts, softmax_inplace, ProbClassifier};
use crate::error::{Error, Result};
use crate::serde_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Manhattan distance.
    L1,
    L2,
    /// `1 − cosine similarity`.
    Cosine,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Cosine => {
                let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    ab += x * y;
                    aa += x * x;
                    bb += y * y;
                }
                if aa == 0.0 || bb == 0.0 {
                    1.0
                } else {
                    1.0 - (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
                }
            }
        }
    }

    /// Representative point of a group: coordinate-wise median for L1, mean otherwise.
    fn center(self, rows: &[ArrayView1<f64>], dim: usize) -> Vec<f64> {
        match self {
            Metric::L1 => (0..dim)
                .map(|j| {
                    let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    median(&mut col)
                })
                .collect(),
            Metric::L2 | Metric::Cosine => {
                let mut m = vec![0.0; dim];
                for r in rows {
                    for (a, v) in m.iter_mut().zip(r.iter()) {
                        *a += v;
                    }
                }
                let n = rows.len().max(1) as f64;
                m.iter_mut().for_each(|v| *v /= n);
                m
            }
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Prototype classifier with `softmax(−distance/temperature)` probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    /// n_classes × n_features.
    #[serde(with = "serde_matrix")]
    pub centroids: Array2<f64>,
    pub metric: Metric,
    pub temperature: f64,
}

impl CentroidModel {
    pub fn distances(&self, x: &[f64]) -> Vec<f64> {
        self.centroids
            .rows()
            .into_iter()
            .map(|c| self.metric.distance(x, c.as_slice().expect("standard layout")))
            .collect()
    }

    /// Index of the closest centroid (first on ties).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let d = self.distances(x);
        let mut best = 0;
        for (i, &v) in d.iter().enumerate() {
            if v < d[best] {
                best = i;
            }
        }
        best
    }
}

impl ProbClassifier for CentroidModel {
    fn n_classes(&self) -> usize {
        self.centroids.nrows()
    }

    fn n_features(&self) -> usize {
        self.centroids.ncols()
    }

    fn proba_row(&self, x: &[f64], out: &mut [f64]) {
        for (o, d) in out.iter_mut().zip(self.distances(x)) {
            *o = -d / self.temperature;
        }
        softmax_inplace(out);
    }
}

/// Median pairwise centroid distance / 4, or 1 when that is zero.
fn default_temperature(centroids: &Array2<f64>, metric: Metric) -> f64 {
    let k = centroids.nrows();
    let mut d = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            d.push(metric.distance(
                centroids.row(i).as_slice().expect("standard layout"),
                centroids.row(j).as_slice().expect("standard layout"),
            ));
        }
    }
    let m = median(&mut d) / 4.0;
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

fn check_temperature(t: Option<f64>) -> Result<()> {
    match t {
        Some(t) if !(t > 0.0 && t.is_finite()) => {
            Err(Error::Config(format!("temperature must be positive, got {t}")))
        }
        _ => Ok(()),
    }
}

/// Supervised centroids: per-class mean (L2, cosine) or coordinate-wise median (L1).
pub fn centroid_fit(
    x: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    metric: Metric,
    temperature: Option<f64>,
) -> Result<CentroidModel> {
    check_temperature(temperature)?;
    let counts = class_counts(labels, n_classes, x.nrows())?;
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::DegenerateLabels(format!("class {empty} has no samples")));
    }
    let d = x.ncols();
    let mut centroids = Array2::zeros((n_classes, d));
    for k in 0..n_classes {
        let rows: Vec<ArrayView1<f64>> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == k)
            .map(|(i, _)| x.row(i))
            .collect();
        let c = metric.center(&rows, d);
        centroids.row_mut(k).assign(&ArrayView1::from(&c[..]));
    }
    let temperature = temperature.unwrap_or_else(|| default_temperature(&centroids, metric));
    Ok(CentroidModel {
        centroids,
        metric,
        temperature,
    })
}

pub const KMEANS_MAX_ITER: usize = 300;

/// Unsupervised centroids by Lloyd's iterations from k-means++ seeding.
/// Empty clusters are re-seeded at the point farthest from its center.
pub fn kmeans_fit(x: ArrayView2<f64>, k: usize, metric: Metric, seed: u64) -> Result<CentroidModel> {
    let (n, d) = x.dim();
    if k < 2 {
        return Err(Error::Config(format!("k-means needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::Config(format!("{n} points cannot form {k} clusters")));
    }
    let xs = x.as_standard_layout();
    let row = |i: usize| xs.row(i).to_slice().expect("standard layout");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<Vec<f64>> = vec![row(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| metric.distance(row(i), &centers[0])).collect();
    while centers.len() < k {
        let weights: Vec<f64> = nearest.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if r < *w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(row(pick).to_vec());
        let c = centers.last().expect("just pushed");
        for (i, nd) in nearest.iter_mut().enumerate() {
            *nd = nd.min(metric.distance(row(i), c));
        }
    }

    let assign = |centers: &[Vec<f64>]| -> (Vec<usize>, Vec<f64>) {
        let mut labels = vec![0usize; n];
        let mut dist = vec![0.0; n];
        for i in 0..n {
            let (mut best, mut bd) = (0, f64::INFINITY);
            for (j, c) in centers.iter().enumerate() {
                let dd = metric.distance(row(i), c);
                if dd < bd {
                    bd = dd;
                    best = j;
                }
            }
            labels[i] = best;
            dist[i] = bd;
        }
        (labels, dist)
    };

    let (mut labels, mut dist) = assign(&centers);
    for _ in 0..KMEANS_MAX_ITER {
        for (j, center) in centers.iter_mut().enumerate() {
            let members: Vec<ArrayView1<f64>> =
                (0..n).filter(|&i| labels[i] == j).map(|i| xs.row(i)).collect();
            if members.is_empty() {
                let far = (0..n)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("n >= k >= 2");
                *center = row(far).to_vec();
                dist[far] = 0.0;
            } else {
                *center = metric.center(&members, d);
            }
        }
        let (next, next_dist) = assign(&centers);
        dist = next_dist;
        if next == labels {
            break;
        }
        labels = next;
    }

    let mut centroids = Array2::zeros((k, d));
    for (j, c) in centers.iter().enumerate() {
        centroids.row_mut(j).assign(&ArrayView1::from(&c[..]));
    }
    let temperature = default_temperature(&centroids, metric);
    Ok(CentroidModel {
        centroids,
        metric,
        temperature,
    })
}
