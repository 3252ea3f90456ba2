//! Feature preparation and audited row access.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ops::Range;
use std::rc::Rc;

use ccbr_core::data::{generate_synthetic, load_dataset, DatasetSchema, FoldSplit, NeuralDataset};
use ccbr_core::features::{
    bin_spike_counts, lag_embed, spiking_band_power, threshold_crossing_rate, trim_targets, SourceKind,
    ThresholdConfig, SPIKING_BAND_HZ,
};
use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, DatasetSource, FeatureConfig};
use crate::error::{BenchError, Result};

pub fn load_or_generate(config: &BenchConfig) -> Result<NeuralDataset> {
    match &config.dataset {
        DatasetSource::Path(dir) => Ok(load_dataset(dir, &DatasetSchema::default())?),
        DatasetSource::Synth(_) => {
            let synth = config.synth_config().expect("synthetic source");
            Ok(generate_synthetic(&synth)?)
        }
    }
}

/// Per-bin features before lag embedding, one column per channel.
pub fn base_features(ds: &NeuralDataset, f: &FeatureConfig) -> Result<Array2<f64>> {
    let missing = |what: &str| BenchError::Config(format!("source_kind needs {what}, which the dataset lacks"));
    Ok(match f.source_kind {
        SourceKind::SpikeCount => {
            if ds.spike_events.is_none() {
                return Err(missing("spike events"));
            }
            bin_spike_counts(ds, f.bin_width)?
        }
        SourceKind::ThresholdCrossing => {
            let sig = ds.continuous.as_ref().ok_or_else(|| missing("a continuous signal"))?;
            let th = f.threshold.unwrap_or_else(|| ThresholdConfig::robust(4.5, 1e-3));
            threshold_crossing_rate(sig, &th, f.bin_width)?
        }
        SourceKind::BandPower => {
            let sig = ds.continuous.as_ref().ok_or_else(|| missing("a continuous signal"))?;
            spiking_band_power(sig, SPIKING_BAND_HZ, f.bin_width)?
        }
    })
}

/// Binned features and targets for one benchmark, with lag-embedded design
/// matrices cached per channel count.
pub struct Prepared {
    base: Array2<f64>,
    targets: Array2<f64>,
    features: FeatureConfig,
    embedded: RefCell<BTreeMap<usize, Rc<Array2<f64>>>>,
}

impl Prepared {
    pub fn new(ds: &NeuralDataset, features: &FeatureConfig) -> Result<Self> {
        let base = base_features(ds, features)?;
        let kin = ds.binned_kinematics(features.bin_width)?;
        let rows = base.nrows().min(kin.nrows());
        let window = features.lags_before + features.lags_after + 1;
        if rows < window + 2 {
            return Err(BenchError::Config(format!(
                "{rows} bins cannot hold a lag window of {window}"
            )));
        }
        let targets = trim_targets(kin.slice(s![..rows, ..]), features.lags_before, features.lags_after);
        Ok(Self {
            base: base.slice(s![..rows, ..]).to_owned(),
            targets,
            features: features.clone(),
            embedded: RefCell::new(BTreeMap::new()),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.base.ncols()
    }

    pub fn targets(&self) -> ArrayView2<'_, f64> {
        self.targets.view()
    }

    /// Lag-embedded design matrix over the first `channels` channels
    /// (all channels when `None`).
    pub fn design(&self, channels: Option<usize>) -> Result<Rc<Array2<f64>>> {
        let n = channels.unwrap_or(self.n_channels());
        if n == 0 || n > self.n_channels() {
            return Err(BenchError::Config(format!(
                "channel_count {n} outside 1..={}",
                self.n_channels()
            )));
        }
        if let Some(x) = self.embedded.borrow().get(&n) {
            return Ok(Rc::clone(x));
        }
        let f = &self.features;
        let fm = lag_embed(self.base.slice(s![.., ..n]), f.lags_before, f.lags_after, f.bin_width, f.source_kind)?;
        let x = Rc::new(fm.values);
        self.embedded.borrow_mut().insert(n, Rc::clone(&x));
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// Rows a decoder is trained on.
    Fit,
    /// Rows used to pick stages or hyperparameters.
    Select,
    /// Rows scored for the report.
    Evaluate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Access {
    pub fold: usize,
    pub purpose: Purpose,
    pub rows: Vec<Range<usize>>,
}

/// Record of every row range handed out, for leakage audits.
#[derive(Debug, Default)]
pub struct AccessLog {
    entries: RefCell<Vec<Access>>,
}

impl AccessLog {
    pub fn entries(&self) -> Vec<Access> {
        self.entries.borrow().clone()
    }

    /// Fit or selection accesses that touch their fold's test block.
    pub fn leaks(&self, folds: &[FoldSplit]) -> Vec<Access> {
        self.entries
            .borrow()
            .iter()
            .filter(|a| a.purpose != Purpose::Evaluate)
            .filter(|a| {
                let test = &folds[a.fold].test;
                a.rows.iter().any(|r| r.start < test.end && test.start < r.end)
            })
            .cloned()
            .collect()
    }
}

/// Row-aligned features and targets that log each extraction.
pub struct TrackedRows<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView2<'a, f64>,
    log: &'a AccessLog,
}

impl<'a> TrackedRows<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: ArrayView2<'a, f64>, log: &'a AccessLog) -> Self {
        assert_eq!(x.nrows(), y.nrows(), "row-aligned features and targets");
        Self { x, y, log }
    }

    pub fn rows(&self, fold: usize, purpose: Purpose, ranges: &[Range<usize>]) -> (Array2<f64>, Array2<f64>) {
        self.log.entries.borrow_mut().push(Access { fold, purpose, rows: ranges.to_vec() });
        let idx: Vec<usize> = ranges.iter().flat_map(|r| r.clone()).collect();
        (self.x.select(Axis(0), &idx), self.y.select(Axis(0), &idx))
    }
}

/// Train, validation and test rows of one fold.
pub struct FoldData {
    pub x_train: Array2<f64>,
    pub y_train: Array2<f64>,
    pub x_val: Array2<f64>,
    pub y_val: Array2<f64>,
    pub x_test: Array2<f64>,
    pub y_test: Array2<f64>,
}

impl FoldData {
    pub fn extract(rows: &TrackedRows<'_>, fold: &FoldSplit) -> Self {
        let i = fold.fold_index;
        let (x_train, y_train) = rows.rows(i, Purpose::Fit, &fold.train);
        let (x_val, y_val) = rows.rows(i, Purpose::Select, std::slice::from_ref(&fold.validation));
        let (x_test, y_test) = rows.rows(i, Purpose::Evaluate, std::slice::from_ref(&fold.test));
        Self { x_train, y_train, x_val, y_val, x_test, y_test }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ccbr_core::data::make_folds;
    use ndarray::Array2;

    #[test]
    fn log_flags_test_overlap() {
        let folds = make_folds(100, 5, 0.1).unwrap();
        let x = Array2::<f64>::zeros((100, 2));
        let y = Array2::<f64>::zeros((100, 1));
        let log = AccessLog::default();
        let rows = TrackedRows::new(x.view(), y.view(), &log);
        FoldData::extract(&rows, &folds[2]);
        assert!(log.leaks(&folds).is_empty());
        rows.rows(2, Purpose::Fit, &[folds[2].test.start..folds[2].test.start + 1]);
        assert_eq!(log.leaks(&folds).len(), 1);
        assert_eq!(log.entries().len(), 4);
    }
}
