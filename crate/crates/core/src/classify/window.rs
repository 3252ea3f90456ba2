use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::centroid::{centroid_fit, CentroidModel, Metric};
use super::{class_counts, ProbClassifier};
use crate::error::{Error, Result};

/// One hyperrectangle per class; points inside exactly one window are
/// assigned to it, everything else is left to the fallback centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowModel {
    /// `bounds[class][feature] = (low, high)`.
    pub bounds: Vec<Vec<(f64, f64)>>,
    pub fallback: CentroidModel,
}

impl WindowModel {
    /// Classes whose window contains `x` (bounds inclusive).
    pub fn containing(&self, x: &[f64]) -> Vec<usize> {
        self.bounds
            .iter()
            .enumerate()
            .filter(|(_, b)| b.iter().zip(x).all(|(&(lo, hi), &v)| lo <= v && v <= hi))
            .map(|(k, _)| k)
            .collect()
    }
}

impl ProbClassifier for WindowModel {
    fn n_classes(&self) -> usize {
        self.bounds.len()
    }

    fn n_features(&self) -> usize {
        self.fallback.n_features()
    }

    fn proba_row(&self, x: &[f64], out: &mut [f64]) {
        match self.containing(x).as_slice() {
            [only] => {
                out.fill(0.0);
                out[*only] = 1.0;
            }
            _ => self.fallback.proba_row(x, out),
        }
    }
}

/// Linear-interpolated empirical quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Per class and feature, bounds at the `(1−coverage)/2` and
/// `1 − (1−coverage)/2` empirical quantiles; fallback is an L1 centroid model.
pub fn window_fit(x: ArrayView2<f64>, labels: &[usize], n_classes: usize, coverage: f64) -> Result<WindowModel> {
    if !(coverage > 0.5 && coverage <= 1.0) {
        return Err(Error::Config(format!("coverage must lie in (0.5, 1], got {coverage}")));
    }
    let counts = class_counts(labels, n_classes, x.nrows())?;
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::DegenerateLabels(format!("class {empty} has no samples")));
    }
    let tail = (1.0 - coverage) / 2.0;
    let bounds = (0..n_classes)
        .map(|k| {
            (0..x.ncols())
                .map(|j| {
                    let mut col: Vec<f64> = labels
                        .iter()
                        .enumerate()
                        .filter(|(_, &l)| l == k)
                        .map(|(i, _)| x[[i, j]])
                        .collect();
                    col.sort_by(f64::total_cmp);
                    (quantile(&col, tail), quantile(&col, 1.0 - tail))
                })
                .collect()
        })
        .collect();
    let fallback = centroid_fit(x, labels, n_classes, Metric::L1, None)?;
    Ok(WindowModel { bounds, fallback })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn model() -> WindowModel {
        let x = array![[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]];
        window_fit(x.view(), &[0, 0, 0, 1, 1, 1], 2, 1.0).unwrap()
    }

    #[test]
    fn inside_one_window_is_one_hot() {
        let m = model();
        let p = m.predict_proba(array![[1.5], [11.0]].view()).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![1.0, 0.0]);
        assert_eq!(p.row(1).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn outside_all_windows_uses_fallback() {
        let m = model();
        let x = [6.0];
        let mut got = [0.0; 2];
        let mut want = [0.0; 2];
        m.proba_row(&x, &mut got);
        m.fallback.proba_row(&x, &mut want);
        assert_eq!(got, want);
    }

    #[test]
    fn coverage_bounds_checked() {
        let x = array![[0.0], [1.0]];
        assert!(window_fit(x.view(), &[0, 1], 2, 0.5).is_err());
        assert!(window_fit(x.view(), &[0, 1], 2, 1.1).is_err());
    }
}
