//! Principal component analysis of the feature matrix.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::symmetric_eigen_leading;
use crate::serde_matrix;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcSelector {
    Fixed(usize),
    /// Smallest count whose cumulative explained variance reaches the fraction.
    VarianceFraction(f64),
}

impl Default for PcSelector {
    fn default() -> Self {
        PcSelector::VarianceFraction(0.90)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// D×P, columns are principal directions.
    #[serde(with = "serde_matrix")]
    pub components: Array2<f64>,
    /// Descending, nonnegative.
    pub explained_variance: Vec<f64>,
    /// Trace of the sample covariance.
    pub total_variance: f64,
}

impl PcaModel {
    /// Fits on the rows of `x` using the sample covariance (divisor `T − 1`).
    ///
    /// Each component is oriented so that its largest-magnitude entry is positive.
    pub fn fit(x: ArrayView2<f64>, selector: PcSelector) -> Result<Self> {
        let (t, d) = x.dim();
        if t < 2 {
            return Err(Error::Fit(format!("PCA needs at least 2 rows, got {t}")));
        }
        if d == 0 {
            return Err(Error::Fit("PCA needs at least one column".into()));
        }
        let max_p = d.min(t);
        match selector {
            PcSelector::Fixed(p) if p == 0 || p > max_p => {
                return Err(Error::Config(format!(
                    "component count {p} outside 1..={max_p}"
                )))
            }
            PcSelector::VarianceFraction(v) if !(v > 0.0 && v <= 1.0) => {
                return Err(Error::Config(format!("variance fraction {v} outside (0, 1]")))
            }
            _ => {}
        }

        let mean = x.mean_axis(Axis(0)).expect("t >= 2");
        let centered = &x - &mean;
        let cov = centered.t().dot(&centered) / (t - 1) as f64;
        let mut p = 0;
        let eig = symmetric_eigen_leading(cov.view(), |values| {
            let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
            p = match selector {
                PcSelector::Fixed(p) => p,
                PcSelector::VarianceFraction(v) => {
                    let target = v * total - 1e-12 * total;
                    let mut cum = 0.0;
                    let mut p = max_p;
                    for (k, ev) in values.iter().enumerate().take(max_p) {
                        cum += ev.max(0.0);
                        if cum >= target {
                            p = k + 1;
                            break;
                        }
                    }
                    p
                }
            };
            p
        })?;
        let values: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = values.iter().sum();

        let mut components = eig.vectors.slice(ndarray::s![.., ..p]).to_owned();
        for mut col in components.columns_mut() {
            let (mut best, mut mag) = (0usize, -1.0);
            for (i, v) in col.iter().enumerate() {
                if v.abs() > mag {
                    mag = v.abs();
                    best = i;
                }
            }
            if col[best] < 0.0 {
                col.mapv_inplace(|v| -v);
            }
        }
        Ok(Self {
            mean: mean.to_vec(),
            components,
            explained_variance: values[..p].to_vec(),
            total_variance: total,
        })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.ncols()
    }

    /// `(X − mean)·components`.
    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(shape_err(
                format!("{} columns", self.n_features()),
                format!("{} columns", x.ncols()),
            ));
        }
        let mean = Array1::from(self.mean.clone());
        Ok((&x - &mean).dot(&self.components))
    }

    /// Maps scores back to feature space.
    pub fn inverse_transform(&self, scores: ArrayView2<f64>) -> Result<Array2<f64>> {
        if scores.ncols() != self.n_components() {
            return Err(shape_err(
                format!("{} columns", self.n_components()),
                format!("{} columns", scores.ncols()),
            ));
        }
        let mean = Array1::from(self.mean.clone());
        Ok(scores.dot(&self.components.t()) + &mean)
    }
}

pub fn pca_fit(x: ArrayView2<f64>, selector: PcSelector) -> Result<PcaModel> {
    PcaModel::fit(x, selector)
}

pub fn pca_transform(model: &PcaModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    model.transform(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rank_one_line() {
        let x = array![[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [-1.0, -2.0], [3.0, 6.0]];
        let m = PcaModel::fit(x.view(), PcSelector::Fixed(2)).unwrap();
        let s5 = 5f64.sqrt();
        assert!((m.components[[0, 0]] - 1.0 / s5).abs() < 1e-9);
        assert!((m.components[[1, 0]] - 2.0 / s5).abs() < 1e-9);
        assert!(m.explained_variance[1].abs() < 1e-12);
    }

    #[test]
    fn isotropic_full_fraction_keeps_all() {
        let x = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let m = PcaModel::fit(x.view(), PcSelector::VarianceFraction(1.0)).unwrap();
        assert_eq!(m.n_components(), 2);
    }

    #[test]
    fn mean_rows_score_zero() {
        let x = array![[1.0, 2.0, 0.5], [3.0, -1.0, 2.0], [0.0, 0.0, 1.0], [2.0, 5.0, -3.0]];
        let m = PcaModel::fit(x.view(), PcSelector::Fixed(2)).unwrap();
        let means = Array2::from_shape_fn((3, 3), |(_, j)| m.mean[j]);
        let s = m.transform(means.view()).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-12));
        assert!(m.transform(array![[1.0, 2.0]].view()).is_err());
    }

    #[test]
    fn degenerate_and_bad_selector() {
        assert!(PcaModel::fit(array![[1.0, 2.0]].view(), PcSelector::Fixed(1)).is_err());
        let x = array![[1.0, 2.0], [2.0, 1.0], [0.0, 0.0]];
        assert!(PcaModel::fit(x.view(), PcSelector::Fixed(3)).is_err());
        assert!(PcaModel::fit(x.view(), PcSelector::VarianceFraction(0.0)).is_err());
    }
}
