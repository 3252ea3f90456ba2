//! Cascaded classification-based regression.
//!
//! Each output dimension is decoded by a cascade of stages. A stage quantizes
//! its scalar target into `levels` bins, trains a probabilistic classifier
//! from PCA scores to bin labels, and reconstructs the target as the
//! expectation of the bin centers under the predicted class distribution.
//! Stage 1 targets the kinematics; every later stage targets the residual
//! left by the stages before it. The decoded trajectory is the sum of all
//! accepted stage outputs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::metrics::r_squared;
use super::quantizer::{Binning, QuantizerModel};
use crate::classify::{Classifier, ClassifierSpec, ProbClassifier};
use crate::data::FoldSplit;
use crate::error::{shape_err, Error, Result};
use crate::features::StandardizerModel;
use crate::reduce::{PcSelector, PcaModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CcbrConfig {
    /// Quantization level (number of bins) for every stage.
    pub levels: usize,
    /// Stage-1 classifier; the regularization factor C lives here.
    pub classifier: ClassifierSpec,
    /// Error-stage classifier; `None` reuses `classifier`.
    #[serde(default)]
    pub error_classifier: Option<ClassifierSpec>,
    pub pc_selector: PcSelector,
    pub max_stages: usize,
    /// Minimum validation R² gain for accepting another stage.
    pub min_gain: f64,
    #[serde(default)]
    pub binning: Binning,
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

impl Default for CcbrConfig {
    fn default() -> Self {
        Self {
            levels: 32,
            classifier: ClassifierSpec::Logistic { c: 1.0 },
            error_classifier: None,
            pc_selector: PcSelector::default(),
            max_stages: 5,
            min_gain: 0.002,
            binning: Binning::Uniform,
            standardize: true,
        }
    }
}

impl CcbrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Config(format!("levels must be >= 2, got {}", self.levels)));
        }
        if self.max_stages < 1 {
            return Err(Error::Config("max_stages must be >= 1".into()));
        }
        if self.min_gain.is_nan() {
            return Err(Error::Config("min_gain must be a number".into()));
        }
        Ok(())
    }
}

/// Trains the classifier of one cascade stage.
pub trait StageTrainer {
    type Model: ProbClassifier;

    /// `stage` is 0 for the movement stage and ≥ 1 for error stages.
    fn train(&self, stage: usize, scores: ArrayView2<f64>, labels: &[usize], levels: usize) -> Result<Self::Model>;
}

/// Trainer driven by the classifier specs of a [`CcbrConfig`].
#[derive(Debug, Clone, Copy)]
pub struct SpecTrainer<'a> {
    pub first: &'a ClassifierSpec,
    pub error: &'a ClassifierSpec,
}

impl<'a> SpecTrainer<'a> {
    pub fn from_config(config: &'a CcbrConfig) -> Self {
        Self {
            first: &config.classifier,
            error: config.error_classifier.as_ref().unwrap_or(&config.classifier),
        }
    }
}

impl StageTrainer for SpecTrainer<'_> {
    type Model = Classifier;

    fn train(&self, stage: usize, scores: ArrayView2<f64>, labels: &[usize], levels: usize) -> Result<Classifier> {
        let spec = if stage == 0 { self.first } else { self.error };
        spec.fit(scores, labels, levels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcbrStage<C> {
    pub quantizer: QuantizerModel,
    pub classifier: C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxStages,
    /// The next stage did not raise validation R² by `min_gain`.
    NoGain,
    /// The residual has (numerically) nothing left to quantize.
    DegenerateResidual,
}

/// Standardization and PCA shared by all stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontend {
    pub standardizer: Option<StandardizerModel>,
    pub pca: PcaModel,
}

impl Frontend {
    pub fn fit(x_train: ArrayView2<f64>, standardize: bool, selector: PcSelector) -> Result<Self> {
        let standardizer = if standardize {
            Some(StandardizerModel::fit(x_train)?)
        } else {
            None
        };
        let pca = match &standardizer {
            Some(s) => PcaModel::fit(s.apply(x_train)?.view(), selector)?,
            None => PcaModel::fit(x_train, selector)?,
        };
        Ok(Self { standardizer, pca })
    }

    pub fn n_features(&self) -> usize {
        self.pca.n_features()
    }

    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match &self.standardizer {
            Some(s) => self.pca.transform(s.apply(x)?.view()),
            None => self.pca.transform(x),
        }
    }
}

/// Fitted cascade for one output dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcbrModel<C = Classifier> {
    pub frontend: Frontend,
    pub stages: Vec<CcbrStage<C>>,
    /// Validation R² after each accepted stage.
    pub validation_trace: Vec<f64>,
    pub stop_reason: StopReason,
    pub config: CcbrConfig,
}

fn single_r2(y: ArrayView1<f64>, pred: ArrayView1<f64>) -> Result<f64> {
    let yt = y.insert_axis(Axis(1));
    let yp = pred.insert_axis(Axis(1));
    Ok(r_squared(yt, yp)?.mean)
}

fn range(y: ArrayView1<f64>) -> f64 {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    hi - lo
}

impl<C: ProbClassifier> CcbrModel<C> {
    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    /// Fits the cascade for one scalar target on precomputed frontend scores.
    pub fn fit_scores<T: StageTrainer<Model = C>>(
        frontend: Frontend,
        scores_train: ArrayView2<f64>,
        y_train: ArrayView1<f64>,
        scores_val: ArrayView2<f64>,
        y_val: ArrayView1<f64>,
        config: &CcbrConfig,
        trainer: &T,
    ) -> Result<Self> {
        config.validate()?;
        if scores_train.nrows() != y_train.len() || scores_val.nrows() != y_val.len() {
            return Err(shape_err("row-aligned scores and targets", "mismatched rows"));
        }
        let y_range = range(y_train);
        let mut pred_train = Array1::<f64>::zeros(y_train.len());
        let mut pred_val = Array1::<f64>::zeros(y_val.len());
        let mut stages = Vec::new();
        let mut trace: Vec<f64> = Vec::new();
        let mut stop_reason = StopReason::MaxStages;

        for s in 0..config.max_stages {
            let target = &y_train - &pred_train;
            if s > 0 && range(target.view()) < 1e-9 * y_range {
                stop_reason = StopReason::DegenerateResidual;
                break;
            }
            let quantizer = match QuantizerModel::fit(target.view(), config.levels, config.binning) {
                Ok(q) => q,
                Err(Error::DegenerateTarget(_)) if s > 0 => {
                    stop_reason = StopReason::DegenerateResidual;
                    break;
                }
                Err(e) => return Err(e),
            };
            let labels = quantizer.encode(target.view());
            let classifier = match trainer.train(s, scores_train, &labels, config.levels) {
                Ok(c) => c,
                Err(Error::DegenerateLabels(_)) if s > 0 => {
                    stop_reason = StopReason::DegenerateResidual;
                    break;
                }
                Err(e) => return Err(e),
            };
            let stage_train = quantizer.decode_expect(classifier.predict_proba(scores_train)?.view())?;
            let stage_val = quantizer.decode_expect(classifier.predict_proba(scores_val)?.view())?;
            let candidate_val = &pred_val + &stage_val;
            let r2 = single_r2(y_val, candidate_val.view())?;
            if let Some(&last) = trace.last() {
                if !(r2 > last && r2 - last >= config.min_gain) {
                    stop_reason = StopReason::NoGain;
                    break;
                }
            }
            pred_train += &stage_train;
            pred_val = candidate_val;
            trace.push(r2);
            stages.push(CcbrStage { quantizer, classifier });
        }

        Ok(Self {
            frontend,
            stages,
            validation_trace: trace,
            stop_reason,
            config: config.clone(),
        })
    }

    /// Sum of stage expectations for frontend scores.
    pub fn predict_scores(&self, scores: ArrayView2<f64>) -> Result<Array1<f64>> {
        let mut out = Array1::<f64>::zeros(scores.nrows());
        for stage in &self.stages {
            let p = stage.classifier.predict_proba(scores)?;
            out += &stage.quantizer.decode_expect(p.view())?;
        }
        Ok(out)
    }

    /// Per-stage contributions, one column per accepted stage.
    pub fn stage_outputs(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let scores = self.frontend.scores(x)?;
        let mut out = Array2::zeros((x.nrows(), self.stages.len()));
        for (j, stage) in self.stages.iter().enumerate() {
            let p = stage.classifier.predict_proba(scores.view())?;
            out.column_mut(j).assign(&stage.quantizer.decode_expect(p.view())?);
        }
        Ok(out)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.frontend.n_features() {
            return Err(shape_err(
                format!("{} features", self.frontend.n_features()),
                format!("{}", x.ncols()),
            ));
        }
        self.predict_scores(self.frontend.scores(x)?.view())
    }
}

impl CcbrModel<Classifier> {
    pub fn parameter_count(&self) -> usize {
        let fe = self.frontend.pca.components.len()
            + self.frontend.pca.mean.len()
            + self.frontend.standardizer.as_ref().map_or(0, |s| 2 * s.mean.len());
        fe + self
            .stages
            .iter()
            .map(|s| s.classifier.parameter_count() + s.quantizer.centers.len())
            .sum::<usize>()
    }
}

/// Fits one cascade per column of `y` on explicit training and validation
/// rows. The frontend is fitted once on the training rows and shared.
pub fn ccbr_fit_rows_with<T: StageTrainer>(
    x_train: ArrayView2<f64>,
    y_train: ArrayView2<f64>,
    x_val: ArrayView2<f64>,
    y_val: ArrayView2<f64>,
    config: &CcbrConfig,
    trainer: &T,
) -> Result<Vec<CcbrModel<T::Model>>> {
    config.validate()?;
    if x_train.nrows() != y_train.nrows() || x_val.nrows() != y_val.nrows() {
        return Err(shape_err("row-aligned X and y", "mismatched rows"));
    }
    if y_train.ncols() != y_val.ncols() || x_train.ncols() != x_val.ncols() {
        return Err(shape_err("matching train/validation columns", "mismatched columns"));
    }
    let frontend = Frontend::fit(x_train, config.standardize, config.pc_selector)?;
    let s_train = frontend.scores(x_train)?;
    let s_val = frontend.scores(x_val)?;
    (0..y_train.ncols())
        .map(|k| {
            CcbrModel::fit_scores(
                frontend.clone(),
                s_train.view(),
                y_train.column(k),
                s_val.view(),
                y_val.column(k),
                config,
                trainer,
            )
        })
        .collect()
}

/// Fits on the fold's training rows, selecting stages on its validation rows.
pub fn ccbr_fit_with<T: StageTrainer>(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    fold: &FoldSplit,
    config: &CcbrConfig,
    trainer: &T,
) -> Result<Vec<CcbrModel<T::Model>>> {
    if x.nrows() != y.nrows() {
        return Err(shape_err(format!("{} target rows", x.nrows()), format!("{}", y.nrows())));
    }
    let train = fold.train_indices();
    let val = fold.validation_indices();
    if train.iter().chain(&val).any(|&i| i >= x.nrows()) {
        return Err(shape_err(format!("fold within {} rows", x.nrows()), "fold out of range"));
    }
    ccbr_fit_rows_with(
        x.select(Axis(0), &train).view(),
        y.select(Axis(0), &train).view(),
        x.select(Axis(0), &val).view(),
        y.select(Axis(0), &val).view(),
        config,
        trainer,
    )
}

pub fn ccbr_fit(x: ArrayView2<f64>, y: ArrayView2<f64>, fold: &FoldSplit, config: &CcbrConfig) -> Result<Vec<CcbrModel>> {
    ccbr_fit_with(x, y, fold, config, &SpecTrainer::from_config(config))
}

/// Decoded trajectory, one column per model.
pub fn ccbr_predict<C: ProbClassifier>(models: &[CcbrModel<C>], x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((x.nrows(), models.len()));
    let mut cached: Option<(&Frontend, Array2<f64>)> = None;
    for (k, m) in models.iter().enumerate() {
        if x.ncols() != m.frontend.n_features() {
            return Err(shape_err(format!("{} features", m.frontend.n_features()), format!("{}", x.ncols())));
        }
        let reuse = matches!(&cached, Some((f, _)) if *f == &m.frontend);
        if !reuse {
            cached = Some((&m.frontend, m.frontend.scores(x)?));
        }
        let scores = &cached.as_ref().expect("set above").1;
        out.column_mut(k).assign(&m.predict_scores(scores.view())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::PcSelector;

    fn toy() -> (Array2<f64>, Array2<f64>) {
        let t = 300;
        let x = Array2::from_shape_fn((t, 3), |(i, j)| {
            let s = i as f64 * 0.05;
            match j {
                0 => s.sin(),
                1 => s.cos(),
                _ => (i % 7) as f64 * 0.01,
            }
        });
        let y = Array2::from_shape_fn((t, 1), |(i, _)| 3.0 * x[[i, 0]] - x[[i, 1]]);
        (x, y)
    }

    #[test]
    fn cascade_fits_and_trace_increases() {
        let (x, y) = toy();
        let fold = crate::data::make_folds(x.nrows(), 3, 0.1).unwrap().remove(1);
        let cfg = CcbrConfig {
            levels: 16,
            pc_selector: PcSelector::Fixed(2),
            ..CcbrConfig::default()
        };
        let models = ccbr_fit(x.view(), y.view(), &fold, &cfg).unwrap();
        let m = &models[0];
        assert!(m.n_stages() >= 1 && m.n_stages() <= cfg.max_stages);
        for w in m.validation_trace.windows(2) {
            assert!(w[1] - w[0] >= cfg.min_gain);
        }
        let pred = ccbr_predict(&models, x.view()).unwrap();
        let r = r_squared(y.view(), pred.view()).unwrap();
        assert!(r.mean > 0.9, "{}", r.mean);
    }

    #[test]
    fn single_stage_prediction_equals_stage_expectation() {
        let (x, y) = toy();
        let fold = crate::data::make_folds(x.nrows(), 3, 0.1).unwrap().remove(0);
        let cfg = CcbrConfig {
            levels: 8,
            max_stages: 1,
            pc_selector: PcSelector::Fixed(2),
            ..CcbrConfig::default()
        };
        let models = ccbr_fit(x.view(), y.view(), &fold, &cfg).unwrap();
        let m = &models[0];
        assert_eq!(m.n_stages(), 1);
        let stages = m.stage_outputs(x.view()).unwrap();
        let pred = m.predict(x.view()).unwrap();
        assert_eq!(stages.column(0), pred);
    }

    #[test]
    fn constant_target_fails_first_stage() {
        let (x, _) = toy();
        let y = Array2::from_elem((x.nrows(), 1), 2.0);
        let fold = crate::data::make_folds(x.nrows(), 3, 0.1).unwrap().remove(0);
        let err = ccbr_fit(x.view(), y.view(), &fold, &CcbrConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateTarget(_)));
    }

    #[test]
    fn shape_mismatch_on_predict() {
        let (x, y) = toy();
        let fold = crate::data::make_folds(x.nrows(), 3, 0.1).unwrap().remove(0);
        let cfg = CcbrConfig { levels: 4, max_stages: 1, ..CcbrConfig::default() };
        let models = ccbr_fit(x.view(), y.view(), &fold, &cfg).unwrap();
        assert!(ccbr_predict(&models, x.slice(ndarray::s![.., ..2])).is_err());
    }
}
