//! Probabilistic multi-class classifiers usable as CCBR stages.
//!
//! Every backend implements [`ProbClassifier`]: for any input row it returns a
//! probability vector over `n_classes` that is nonnegative and sums to one.
//! [`Classifier`] is the closed, serializable set of fitted backends and
//! [`ClassifierSpec`] the matching set of training recipes.

mod centroid;
mod compress;
mod linear;
mod tree;
mod window;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

pub use centroid::{centroid_fit, kmeans_fit, CentroidModel, Metric, KMEANS_MAX_ITER};
pub use compress::{prune_weights, quantize_weights, PruneReport, QuantizeWeights};
pub use linear::{logistic_fit, logistic_objective, svm_platt_fit, Calibration, LinearProbModel};
pub use tree::{tree_fit, Node, SplitTest, TreeKind, TreeModel};
pub use window::{window_fit, WindowModel};

/// Behavioral contract shared by all stage classifiers.
pub trait ProbClassifier {
    fn n_classes(&self) -> usize;
    fn n_features(&self) -> usize;

    /// Writes class probabilities for one row into `out` (length `n_classes`).
    fn proba_row(&self, x: &[f64], out: &mut [f64]);

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_features(self.n_features(), x)?;
        let mut out = Array2::zeros((x.nrows(), self.n_classes()));
        let mut buf = vec![0.0; x.ncols()];
        for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            for (b, v) in buf.iter_mut().zip(row.iter()) {
                *b = *v;
            }
            let slot = dst.as_slice_mut().expect("standard layout");
            self.proba_row(&buf, slot);
        }
        Ok(out)
    }

    /// Most probable class per row (first index on ties).
    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.rows().into_iter().map(|r| argmax(r.as_slice().expect("standard layout"))).collect())
    }
}

pub(crate) fn check_features(expected: usize, x: ArrayView2<f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(shape_err(format!("{expected} features"), format!("{} features", x.ncols())));
    }
    Ok(())
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// In-place numerically stable softmax.
pub(crate) fn softmax_inplace(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Validates labels and returns the per-class counts.
pub(crate) fn class_counts(labels: &[usize], n_classes: usize, n_rows: usize) -> Result<Vec<usize>> {
    if labels.len() != n_rows {
        return Err(shape_err(format!("{n_rows} labels"), format!("{} labels", labels.len())));
    }
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(Error::DegenerateLabels(format!(
                "label {l} outside 0..{n_classes}"
            )));
        }
        counts[l] += 1;
    }
    Ok(counts)
}

/// Fitted classifier of any supported backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum Classifier {
    Linear(LinearProbModel),
    Centroid(CentroidModel),
    Window(WindowModel),
    Tree(TreeModel),
    /// Backend fitted on the subset of classes seen in training; the other
    /// classes get probability zero.
    Compact {
        inner: Box<Classifier>,
        classes: Vec<usize>,
        n_classes: usize,
    },
}

impl Classifier {
    /// Number of stored parameters (weights, centroids, bounds, node values).
    pub fn parameter_count(&self) -> usize {
        match self {
            Classifier::Linear(m) => m.weights.len() + m.biases.len(),
            Classifier::Centroid(m) => m.centroids.len(),
            Classifier::Window(m) => 2 * m.bounds.iter().map(Vec::len).sum::<usize>() + m.fallback.centroids.len(),
            Classifier::Tree(m) => m.parameter_count(),
            Classifier::Compact { inner, .. } => inner.parameter_count(),
        }
    }
}

impl ProbClassifier for Classifier {
    fn n_classes(&self) -> usize {
        match self {
            Classifier::Linear(m) => m.n_classes(),
            Classifier::Centroid(m) => m.n_classes(),
            Classifier::Window(m) => m.n_classes(),
            Classifier::Tree(m) => m.n_classes(),
            Classifier::Compact { n_classes, .. } => *n_classes,
        }
    }

    fn n_features(&self) -> usize {
        match self {
            Classifier::Linear(m) => m.n_features(),
            Classifier::Centroid(m) => m.n_features(),
            Classifier::Window(m) => m.n_features(),
            Classifier::Tree(m) => m.n_features(),
            Classifier::Compact { inner, .. } => inner.n_features(),
        }
    }

    fn proba_row(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Classifier::Linear(m) => m.proba_row(x, out),
            Classifier::Centroid(m) => m.proba_row(x, out),
            Classifier::Window(m) => m.proba_row(x, out),
            Classifier::Tree(m) => m.proba_row(x, out),
            Classifier::Compact { inner, classes, .. } => {
                let mut sub = vec![0.0; classes.len()];
                inner.proba_row(x, &mut sub);
                out.fill(0.0);
                for (&c, p) in classes.iter().zip(sub) {
                    out[c] = p;
                }
            }
        }
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            Classifier::Linear(m) => m.predict_proba(x),
            Classifier::Compact { inner, classes, n_classes } => {
                let sub = inner.predict_proba(x)?;
                let mut out = Array2::zeros((x.nrows(), *n_classes));
                for (j, &c) in classes.iter().enumerate() {
                    out.column_mut(c).assign(&sub.column(j));
                }
                Ok(out)
            }
            _ => {
                check_features(self.n_features(), x)?;
                let mut out = Array2::zeros((x.nrows(), self.n_classes()));
                let mut buf = vec![0.0; x.ncols()];
                for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
                    for (b, v) in buf.iter_mut().zip(row.iter()) {
                        *b = *v;
                    }
                    self.proba_row(&buf, dst.as_slice_mut().expect("standard layout"));
                }
                Ok(out)
            }
        }
    }
}

/// Training recipe for a stage classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Logistic { c: f64 },
    SvmPlatt { c: f64 },
    Centroid {
        metric: Metric,
        #[serde(default)]
        temperature: Option<f64>,
    },
    Window { coverage: f64 },
    Tree {
        tree: TreeKind,
        max_depth: usize,
        min_leaf: usize,
    },
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Logistic { c: 1.0 }
    }
}

impl ClassifierSpec {
    /// Copy with the regularization factor replaced (linear backends only).
    pub fn with_c(&self, c: f64) -> Self {
        match self {
            ClassifierSpec::Logistic { .. } => ClassifierSpec::Logistic { c },
            ClassifierSpec::SvmPlatt { .. } => ClassifierSpec::SvmPlatt { c },
            other => other.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Logistic { .. } => "logistic",
            ClassifierSpec::SvmPlatt { .. } => "svm_platt",
            ClassifierSpec::Centroid { .. } => "centroid",
            ClassifierSpec::Window { .. } => "window",
            ClassifierSpec::Tree { .. } => "tree",
        }
    }

    /// Fits on `labels ∈ 0..n_classes`. Classes absent from `labels` are
    /// dropped before fitting and receive probability zero.
    pub fn fit(&self, x: ArrayView2<f64>, labels: &[usize], n_classes: usize) -> Result<Classifier> {
        let counts = class_counts(labels, n_classes, x.nrows())?;
        let present: Vec<usize> = (0..n_classes).filter(|&c| counts[c] > 0).collect();
        if present.len() < 2 {
            return Err(Error::DegenerateLabels(format!(
                "need at least 2 distinct labels, found {}",
                present.len()
            )));
        }
        if present.len() == n_classes {
            return self.fit_dense(x, labels, n_classes);
        }
        let mut remap = vec![usize::MAX; n_classes];
        for (j, &c) in present.iter().enumerate() {
            remap[c] = j;
        }
        let compact: Vec<usize> = labels.iter().map(|&l| remap[l]).collect();
        let inner = self.fit_dense(x, &compact, present.len())?;
        Ok(Classifier::Compact {
            inner: Box::new(inner),
            classes: present,
            n_classes,
        })
    }

    fn fit_dense(&self, x: ArrayView2<f64>, labels: &[usize], n_classes: usize) -> Result<Classifier> {
        Ok(match self {
            ClassifierSpec::Logistic { c } => Classifier::Linear(logistic_fit(x, labels, n_classes, *c)?),
            ClassifierSpec::SvmPlatt { c } => Classifier::Linear(svm_platt_fit(x, labels, n_classes, *c)?),
            ClassifierSpec::Centroid { metric, temperature } => {
                Classifier::Centroid(centroid_fit(x, labels, n_classes, *metric, *temperature)?)
            }
            ClassifierSpec::Window { coverage } => {
                Classifier::Window(window_fit(x, labels, n_classes, *coverage)?)
            }
            ClassifierSpec::Tree { tree, max_depth, min_leaf } => {
                Classifier::Tree(tree_fit(x, labels, n_classes, *tree, *max_depth, *min_leaf)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn absent_classes_get_zero_probability() {
        let x = array![[0.0], [0.1], [5.0], [5.1]];
        let labels = [0, 0, 3, 3];
        let m = ClassifierSpec::Logistic { c: 1.0 }.fit(x.view(), &labels, 5).unwrap();
        assert_eq!(m.n_classes(), 5);
        let p = m.predict_proba(x.view()).unwrap();
        for row in p.rows() {
            assert_eq!(row[1], 0.0);
            assert_eq!(row[2], 0.0);
            assert_eq!(row[4], 0.0);
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert_eq!(m.predict(x.view()).unwrap(), vec![0, 0, 3, 3]);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = array![[0.0], [1.0]];
        let err = ClassifierSpec::default().fit(x.view(), &[1, 1], 3).unwrap_err();
        assert!(matches!(err, Error::DegenerateLabels(_)));
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let x = array![[0.0, 1.0], [0.3, 0.9], [2.0, -1.0], [2.2, -0.7], [4.0, 3.0], [4.1, 3.3]];
        let labels = [0, 0, 1, 1, 2, 2];
        for spec in [
            ClassifierSpec::Logistic { c: 1.0 },
            ClassifierSpec::SvmPlatt { c: 1.0 },
            ClassifierSpec::Centroid { metric: Metric::L1, temperature: None },
            ClassifierSpec::Window { coverage: 0.9 },
            ClassifierSpec::Tree { tree: TreeKind::Oblique, max_depth: 3, min_leaf: 1 },
        ] {
            let m = spec.fit(x.view(), &labels, 3).unwrap();
            let text = serde_json::to_string(&m).unwrap();
            let back: Classifier = serde_json::from_str(&text).unwrap();
            assert_eq!(m, back, "{}", spec.name());
        }
    }
}
