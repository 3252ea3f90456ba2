use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Equal-width bins over the training range.
    #[default]
    Uniform,
    /// Equal-count bins; centers at bin midpoints.
    Quantile,
}

/// Bin edges and "kinematic quanta" (bin centers) of one scalar target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerModel {
    /// `levels − 1` interior bin boundaries, strictly ascending.
    pub edges: Vec<f64>,
    /// `levels` bin centers.
    pub centers: Vec<f64>,
    pub levels: usize,
    /// `(min, max)` of the training values.
    pub input_range: (f64, f64),
    pub binning: Binning,
}

impl QuantizerModel {
    pub fn fit(y: ArrayView1<f64>, levels: usize, binning: Binning) -> Result<Self> {
        if levels < 2 {
            return Err(Error::Config(format!("quantization level must be >= 2, got {levels}")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateTarget("target contains non-finite values".into()));
        }
        let mut sorted = y.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() < levels {
            return Err(Error::DegenerateTarget(format!(
                "{} distinct values cannot fill {levels} levels",
                distinct.len()
            )));
        }
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let (edges, centers) = match binning {
            Binning::Uniform => {
                let w = (hi - lo) / levels as f64;
                let edges: Vec<f64> = (1..levels).map(|k| lo + k as f64 * w).collect();
                let centers = (0..levels).map(|k| lo + (k as f64 + 0.5) * w).collect();
                (edges, centers)
            }
            Binning::Quantile => {
                let n = sorted.len();
                let edges: Vec<f64> = (1..levels)
                    .map(|k| {
                        let pos = k as f64 / levels as f64 * (n - 1) as f64;
                        let (a, b) = (pos.floor() as usize, pos.ceil() as usize);
                        sorted[a] + (sorted[b] - sorted[a]) * (pos - a as f64)
                    })
                    .collect();
                let mut bounds = vec![lo];
                bounds.extend_from_slice(&edges);
                bounds.push(hi);
                let centers = bounds.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
                (edges, centers)
            }
        };
        let model = Self {
            edges,
            centers,
            levels,
            input_range: (lo, hi),
            binning,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let ascending = self.edges.windows(2).all(|w| w[0] < w[1]);
        let between = (0..self.levels).all(|k| {
            let lo = if k == 0 { f64::NEG_INFINITY } else { self.edges[k - 1] };
            let hi = if k + 1 == self.levels { f64::INFINITY } else { self.edges[k] };
            lo < self.centers[k] && self.centers[k] < hi
        });
        if ascending && between {
            Ok(())
        } else {
            Err(Error::DegenerateTarget(
                "target distribution too concentrated for distinct bins".into(),
            ))
        }
    }

    /// Width of the training range.
    pub fn span(&self) -> f64 {
        self.input_range.1 - self.input_range.0
    }

    /// Bin index of `y`; values beyond the training range land in the end bins.
    pub fn encode_one(&self, y: f64) -> usize {
        self.edges.partition_point(|&e| e <= y)
    }

    pub fn encode(&self, y: ArrayView1<f64>) -> Vec<usize> {
        y.iter().map(|&v| self.encode_one(v)).collect()
    }

    /// Expected value `Σ_k p_k·center_k` per row of `probs`.
    pub fn decode_expect(&self, probs: ArrayView2<f64>) -> Result<Array1<f64>> {
        if probs.ncols() != self.levels {
            return Err(shape_err(
                format!("{} probability columns", self.levels),
                format!("{}", probs.ncols()),
            ));
        }
        Ok(probs.dot(&ArrayView1::from(&self.centers[..])))
    }
}

pub fn quantizer_fit(y: ArrayView1<f64>, levels: usize) -> Result<QuantizerModel> {
    QuantizerModel::fit(y, levels, Binning::Uniform)
}

pub fn quantizer_encode(q: &QuantizerModel, y: ArrayView1<f64>) -> Vec<usize> {
    q.encode(y)
}

pub fn quantizer_decode_expect(q: &QuantizerModel, probs: ArrayView2<f64>) -> Result<Array1<f64>> {
    q.decode_expect(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn unit_interval_two_levels() {
        let q = quantizer_fit(array![0.0, 0.3, 0.6, 1.0].view(), 2).unwrap();
        assert_eq!(q.edges, vec![0.5]);
        assert_eq!(q.centers, vec![0.25, 0.75]);
    }

    #[test]
    fn constant_target_is_degenerate() {
        let err = quantizer_fit(array![2.0, 2.0, 2.0].view(), 2).unwrap_err();
        assert!(matches!(err, Error::DegenerateTarget(_)));
    }

    #[test]
    fn one_hot_decodes_to_center() {
        let q = quantizer_fit(array![-1.0, 0.0, 1.0, 2.0, 3.0].view(), 4).unwrap();
        for k in 0..4 {
            let mut p = Array2::zeros((1, 4));
            p[[0, k]] = 1.0;
            assert_eq!(q.decode_expect(p.view()).unwrap()[0], q.centers[k]);
        }
    }

    #[test]
    fn uniform_probs_symmetric_centers_decode_to_zero() {
        let q = quantizer_fit(array![-2.0, -1.0, 1.0, 2.0].view(), 4).unwrap();
        let p = Array2::from_elem((1, 4), 0.25);
        assert!(q.decode_expect(p.view()).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn out_of_range_clamps() {
        let q = quantizer_fit(array![0.0, 1.0, 2.0, 3.0].view(), 3).unwrap();
        assert_eq!(q.encode_one(-10.0), 0);
        assert_eq!(q.encode_one(10.0), 2);
        assert!(q.decode_expect(Array2::zeros((1, 2)).view()).is_err());
    }

    #[test]
    fn quantile_bins_hold_equal_counts() {
        let y = Array1::from_iter((0..100).map(|i| (i as f64).powi(2)));
        let q = QuantizerModel::fit(y.view(), 4, Binning::Quantile).unwrap();
        let mut counts = [0; 4];
        for l in q.encode(y.view()) {
            counts[l] += 1;
        }
        assert!(counts.iter().all(|&c| (24..=26).contains(&c)), "{counts:?}");
    }
}
