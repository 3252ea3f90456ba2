//! Session datasets: neural activity paired with kinematic targets.

mod folds;
mod io;
mod synth;

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use folds::{make_folds, FoldSplit};
pub use io::{load_dataset, save_dataset, DatasetSchema};
pub use synth::{
    generate_synthetic, Nonlinearity, SynthConfig, TuningConfig, VelocityProcess,
};

/// A single sorted-unit spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub unit: usize,
    pub time: f64,
}

/// Uniformly sampled raw traces, one row per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSignal {
    /// C×S samples.
    pub samples: Array2<f64>,
    pub rate_hz: f64,
}

impl ContinuousSignal {
    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }
}

/// Recorded neural activity and the movement trajectory over one session.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralDataset {
    pub spike_events: Option<Vec<SpikeEvent>>,
    /// Number of units addressed by `spike_events`; zero when spikes are absent.
    pub n_units: usize,
    pub continuous: Option<ContinuousSignal>,
    /// T_k×K kinematic samples; sample `i` is at time `i / kin_rate_hz`.
    pub kinematics: Array2<f64>,
    pub kin_rate_hz: f64,
    pub duration: f64,
    pub metadata: BTreeMap<String, String>,
}

impl NeuralDataset {
    /// Number of kinematic samples implied by duration and rate.
    pub fn expected_kin_len(duration: f64, kin_rate_hz: f64) -> usize {
        (duration * kin_rate_hz).round() as usize
    }

    pub fn n_kin_dims(&self) -> usize {
        self.kinematics.ncols()
    }

    /// Checks every dataset invariant, naming the first one that fails.
    pub fn validate(&self) -> Result<()> {
        if self.spike_events.is_none() && self.continuous.is_none() {
            return Err(Error::Validation(
                "neither spike events nor continuous data present".into(),
            ));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Validation(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.kin_rate_hz > 0.0 && self.kin_rate_hz.is_finite()) {
            return Err(Error::Validation(format!(
                "kin_rate_hz must be positive, got {}",
                self.kin_rate_hz
            )));
        }
        let expected = Self::expected_kin_len(self.duration, self.kin_rate_hz);
        if self.kinematics.nrows() != expected {
            return Err(Error::Validation(format!(
                "kinematics length mismatch: expected {expected} samples, found {}",
                self.kinematics.nrows()
            )));
        }
        if self.kinematics.ncols() == 0 {
            return Err(Error::Validation("kinematics have no columns".into()));
        }
        if self.kinematics.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("kinematics contain non-finite values".into()));
        }
        if let Some(spikes) = &self.spike_events {
            for s in spikes {
                if !(0.0..=self.duration).contains(&s.time) {
                    return Err(Error::Validation(format!(
                        "spike time {} outside [0, {}]",
                        s.time, self.duration
                    )));
                }
                if s.unit >= self.n_units {
                    return Err(Error::Validation(format!(
                        "unit index {} outside contiguous range 0..{}",
                        s.unit, self.n_units
                    )));
                }
            }
        }
        if let Some(c) = &self.continuous {
            if !(c.rate_hz > 0.0 && c.rate_hz.is_finite()) {
                return Err(Error::Validation(format!(
                    "continuous rate must be positive, got {}",
                    c.rate_hz
                )));
            }
            if c.samples.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(
                    "continuous samples contain non-finite values".into(),
                ));
            }
        }
        Ok(())
    }

    /// Averages kinematic samples into bins of `bin_width` seconds, giving one
    /// target row per feature bin. Bins without any sample take the sample
    /// nearest the bin center.
    pub fn binned_kinematics(&self, bin_width: f64) -> Result<Array2<f64>> {
        if !(bin_width > 0.0) {
            return Err(Error::Config(format!("bin width must be positive, got {bin_width}")));
        }
        let n_bins = n_bins(self.duration, bin_width);
        let k = self.kinematics.ncols();
        let tk = self.kinematics.nrows();
        let mut sums = Array2::<f64>::zeros((n_bins, k));
        let mut counts = vec![0usize; n_bins];
        for i in 0..tk {
            let t = i as f64 / self.kin_rate_hz;
            let b = (t / bin_width + 1e-9).floor() as usize;
            if b < n_bins {
                counts[b] += 1;
                for j in 0..k {
                    sums[[b, j]] += self.kinematics[[i, j]];
                }
            }
        }
        for b in 0..n_bins {
            if counts[b] > 0 {
                let inv = 1.0 / counts[b] as f64;
                sums.row_mut(b).mapv_inplace(|v| v * inv);
            } else {
                let center = (b as f64 + 0.5) * bin_width;
                let i = ((center * self.kin_rate_hz).round() as usize).min(tk.saturating_sub(1));
                sums.row_mut(b).assign(&self.kinematics.row(i));
            }
        }
        Ok(sums)
    }
}

/// Number of complete bins of width `bin_width` within `duration`.
pub(crate) fn n_bins(duration: f64, bin_width: f64) -> usize {
    (duration / bin_width + 1e-9).floor() as usize
}
