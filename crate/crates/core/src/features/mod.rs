//! Decoder inputs: binned spike counts, threshold crossings, spiking band
//! power, lag embedding and standardization.

mod filter;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{n_bins, ContinuousSignal, NeuralDataset};
use crate::error::{shape_err, Error, Result};

pub use filter::{Biquad, BiquadCascade};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    SpikeCount,
    ThresholdCrossing,
    BandPower,
}

/// Lag-embedded T×D decoder input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub bin_width: f64,
    pub lags_before: usize,
    pub lags_after: usize,
    pub source_kind: SourceKind,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
}

/// Spike counts per unit in bins `[tΔ, (t+1)Δ)`, `T = floor(duration/Δ)`.
pub fn bin_spike_counts(dataset: &NeuralDataset, bin_width: f64) -> Result<Array2<f64>> {
    let spikes = dataset
        .spike_events
        .as_ref()
        .ok_or_else(|| Error::UnsupportedInput("dataset has no spike events".into()))?;
    if !(bin_width > 0.0) {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width}")));
    }
    let t = n_bins(dataset.duration, bin_width);
    let mut counts = Array2::<f64>::zeros((t, dataset.n_units));
    for s in spikes {
        let b = (s.time / bin_width).floor();
        if b >= 0.0 && (b as usize) < t {
            counts[[b as usize, s.unit]] += 1.0;
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    #[default]
    Negative,
    Positive,
}

/// How the per-channel detection threshold is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `scale × median(|x|)/0.6745`, signed by the polarity.
    Robust { scale: f64 },
    /// Fixed signed threshold in signal units.
    Fixed { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub rule: ThresholdRule,
    pub refractory: f64,
    #[serde(default)]
    pub polarity: Polarity,
}

impl ThresholdConfig {
    pub fn robust(scale: f64, refractory: f64) -> Self {
        Self {
            rule: ThresholdRule::Robust { scale },
            refractory,
            polarity: Polarity::Negative,
        }
    }
}

/// `median(|x|) / 0.6745`, a noise standard-deviation estimate insensitive to spikes.
pub fn robust_noise(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    let med = if n % 2 == 1 {
        a[n / 2]
    } else {
        0.5 * (a[n / 2 - 1] + a[n / 2])
    };
    med / 0.6745
}

/// Sample indices of accepted threshold crossings on one channel.
///
/// A negative-going crossing is a sample strictly below `threshold` whose
/// predecessor is at or above it (mirrored for positive polarity). Crossings
/// closer than `refractory_samples` to the last accepted one are dropped.
pub fn threshold_crossings(
    x: &[f64],
    threshold: f64,
    polarity: Polarity,
    refractory_samples: f64,
) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for i in 1..x.len() {
        let crossed = match polarity {
            Polarity::Negative => x[i] < threshold && x[i - 1] >= threshold,
            Polarity::Positive => x[i] > threshold && x[i - 1] <= threshold,
        };
        if !crossed {
            continue;
        }
        if let Some(&last) = out.last() {
            if ((i - last) as f64) < refractory_samples {
                continue;
            }
        }
        out.push(i);
    }
    out
}

/// Threshold-crossing counts per channel and bin, without spike sorting.
pub fn threshold_crossing_rate(
    signal: &ContinuousSignal,
    config: &ThresholdConfig,
    bin_width: f64,
) -> Result<Array2<f64>> {
    let rate = signal.rate_hz;
    if !(rate > 0.0) {
        return Err(Error::Config(format!("sampling rate must be positive, got {rate}")));
    }
    if !(config.refractory >= 0.0) {
        return Err(Error::Config(format!(
            "refractory period must be nonnegative, got {}",
            config.refractory
        )));
    }
    if !(bin_width > 0.0) {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width}")));
    }
    let n_samples = signal.samples.ncols();
    let t = n_bins(n_samples as f64 / rate, bin_width);
    let mut counts = Array2::<f64>::zeros((t, signal.n_channels()));
    for (ch, row) in signal.samples.rows().into_iter().enumerate() {
        let x = row.to_vec();
        let threshold = match (config.rule, config.polarity) {
            (ThresholdRule::Fixed { value }, _) => value,
            (ThresholdRule::Robust { scale }, Polarity::Negative) => -scale * robust_noise(&x),
            (ThresholdRule::Robust { scale }, Polarity::Positive) => scale * robust_noise(&x),
        };
        for i in threshold_crossings(&x, threshold, config.polarity, config.refractory * rate) {
            let b = (i as f64 / rate / bin_width).floor() as usize;
            if b < t {
                counts[[b, ch]] += 1.0;
            }
        }
    }
    Ok(counts)
}

pub const SPIKING_BAND_HZ: (f64, f64) = (300.0, 1000.0);

/// Mean squared band-passed signal per channel and bin.
pub fn spiking_band_power(
    signal: &ContinuousSignal,
    band: (f64, f64),
    bin_width: f64,
) -> Result<Array2<f64>> {
    let rate = signal.rate_hz;
    let filt = BiquadCascade::butterworth_bandpass(band.0, band.1, rate)?;
    if !(bin_width > 0.0) {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width}")));
    }
    let n_samples = signal.samples.ncols();
    let t = n_bins(n_samples as f64 / rate, bin_width);
    let mut power = Array2::<f64>::zeros((t, signal.n_channels()));
    let mut counts = vec![0usize; t];
    for s in 0..n_samples {
        let b = (s as f64 / rate / bin_width).floor() as usize;
        if b < t {
            counts[b] += 1;
        }
    }
    for (ch, row) in signal.samples.rows().into_iter().enumerate() {
        let y = filt.filter(&row.to_vec());
        for (s, v) in y.iter().enumerate() {
            let b = (s as f64 / rate / bin_width).floor() as usize;
            if b < t {
                power[[b, ch]] += v * v;
            }
        }
    }
    for (b, &n) in counts.iter().enumerate() {
        if n > 0 {
            power.row_mut(b).mapv_inplace(|v| v / n as f64);
        }
    }
    Ok(power)
}

/// Concatenates rows `t − lags_before ..= t + lags_after` for every `t` with
/// full context. Output row `i` corresponds to input row `i + lags_before`.
pub fn lag_embed(
    base: ArrayView2<f64>,
    lags_before: usize,
    lags_after: usize,
    bin_width: f64,
    source_kind: SourceKind,
) -> Result<FeatureMatrix> {
    let (t, c) = base.dim();
    let window = lags_before + lags_after + 1;
    if window > t || c == 0 {
        return Err(Error::Config(format!(
            "lag window of {window} rows does not fit a {t}x{c} series"
        )));
    }
    if base.iter().any(|v| !v.is_finite()) {
        return Err(Error::UnsupportedInput("features contain non-finite values".into()));
    }
    let rows = t - window + 1;
    let mut values = Array2::<f64>::zeros((rows, c * window));
    for i in 0..rows {
        for w in 0..window {
            values
                .slice_mut(s![i, w * c..(w + 1) * c])
                .assign(&base.row(i + w));
        }
    }
    Ok(FeatureMatrix {
        values,
        bin_width,
        lags_before,
        lags_after,
        source_kind,
    })
}

/// Drops target rows that have no full lag context, matching [`lag_embed`].
pub fn trim_targets(y: ArrayView2<f64>, lags_before: usize, lags_after: usize) -> Array2<f64> {
    let t = y.nrows();
    y.slice(s![lags_before..t.saturating_sub(lags_after).max(lags_before), ..])
        .to_owned()
}

/// Per-column training statistics. Columns with zero variance map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerModel {
    pub mean: Vec<f64>,
    /// Population standard deviation; 1.0 for constant columns.
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl StandardizerModel {
    pub fn fit(train: ArrayView2<f64>) -> Result<Self> {
        let n = train.nrows();
        if n == 0 || train.ncols() == 0 {
            return Err(Error::Fit("cannot standardize an empty matrix".into()));
        }
        let mean: Array1<f64> = train.mean_axis(Axis(0)).expect("non-empty");
        let mut std = Vec::with_capacity(train.ncols());
        let mut constant = Vec::with_capacity(train.ncols());
        for (j, col) in train.columns().into_iter().enumerate() {
            let m = mean[j];
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            // spread indistinguishable from round-off of the mean
            if sd <= 1e-12 * m.abs().max(f64::MIN_POSITIVE) || sd == 0.0 {
                std.push(1.0);
                constant.push(true);
            } else {
                std.push(sd);
                constant.push(false);
            }
        }
        Ok(Self {
            mean: mean.to_vec(),
            std,
            constant,
        })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(shape_err(
                format!("{} columns", self.n_features()),
                format!("{} columns", x.ncols()),
            ));
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            if self.constant[j] {
                col.fill(0.0);
            } else {
                let (m, s) = (self.mean[j], self.std[j]);
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        Ok(out)
    }
}

pub fn standardize_fit(train: &FeatureMatrix) -> Result<StandardizerModel> {
    StandardizerModel::fit(train.view())
}

pub fn standardize_apply(model: &StandardizerModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix {
        values: model.apply(x.view())?,
        ..x.clone()
    })
}
