//! Cosine-tuned synthetic sessions with a known velocity-to-rate mapping.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{NeuralDataset, SpikeEvent};
use crate::error::{Error, Result};

/// Resolution of the piecewise-constant rate used for spike generation.
const SUBGRID_S: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    /// Rate at zero velocity (Hz).
    pub baseline_rate: f64,
    /// Rate modulation at unit normalized speed along the preferred direction (Hz).
    pub modulation_depth: f64,
    /// Preferred direction per unit (radians). Empty means "draw uniformly from the seed".
    #[serde(default)]
    pub preferred_direction: Vec<f64>,
    /// Multiplier on normalized speed.
    #[serde(default = "one")]
    pub speed_gain: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityProcess {
    /// Time constant of the two exponential smoothing passes (s).
    pub smoothing_tau: f64,
    /// RMS speed of the generated trajectory (cm/s).
    pub speed_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    None,
    /// `r ↦ R·tanh(r/R)` with ceiling `R = baseline_rate + modulation_depth`.
    Saturating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_units: usize,
    /// Session length (s).
    pub duration: f64,
    /// Kinematic sampling rate (Hz).
    pub bin_hint_hz: f64,
    pub tuning: TuningConfig,
    pub velocity_process: VelocityProcess,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    pub noise_seed: u64,
}

impl SynthConfig {
    /// 100 cosine-tuned units over 800 s: the reference decoding session.
    pub fn reference() -> Self {
        Self {
            n_units: 100,
            duration: 800.0,
            bin_hint_hz: 100.0,
            tuning: TuningConfig {
                baseline_rate: 10.0,
                modulation_depth: 10.0,
                preferred_direction: Vec::new(),
                speed_gain: 1.0,
            },
            velocity_process: VelocityProcess {
                smoothing_tau: 0.3,
                speed_scale: 10.0,
            },
            nonlinearity: Nonlinearity::None,
            noise_seed: 7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_units == 0 {
            return bad("n_units must be at least 1".into());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.bin_hint_hz > 0.0) {
            return bad(format!("bin_hint_hz must be positive, got {}", self.bin_hint_hz));
        }
        let t = &self.tuning;
        if !(t.baseline_rate >= 0.0) || !(t.modulation_depth >= 0.0) || !(t.speed_gain >= 0.0) {
            return bad("rates and gains must be nonnegative".into());
        }
        if !t.preferred_direction.is_empty() && t.preferred_direction.len() != self.n_units {
            return bad(format!(
                "expected {} preferred directions, got {}",
                self.n_units,
                t.preferred_direction.len()
            ));
        }
        let v = &self.velocity_process;
        if !(v.smoothing_tau > 0.0) || !(v.speed_scale > 0.0) {
            return bad("velocity smoothing_tau and speed_scale must be positive".into());
        }
        Ok(())
    }
}

/// Generates a session whose unit rates are cosine-tuned to a smoothed
/// random-walk velocity. Output is a pure function of `config`.
pub fn generate_synthetic(config: &SynthConfig) -> Result<NeuralDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.noise_seed);

    let n_kin = NeuralDataset::expected_kin_len(config.duration, config.bin_hint_hz);
    let velocity = smoothed_velocity(&mut rng, n_kin, config);

    let directions: Vec<f64> = if config.tuning.preferred_direction.is_empty() {
        (0..config.n_units).map(|_| rng.random::<f64>() * 2.0 * PI).collect()
    } else {
        config.tuning.preferred_direction.clone()
    };

    // rate per 1 ms sub-bin, shared across units through the velocity lookup
    let n_sub = (config.duration / SUBGRID_S).ceil() as usize;
    let sub_to_kin: Vec<usize> = (0..n_sub)
        .map(|i| {
            let t = (i as f64 + 0.5) * SUBGRID_S;
            ((t * config.bin_hint_hz).floor() as usize).min(n_kin.saturating_sub(1))
        })
        .collect();

    let tuning = &config.tuning;
    let ceiling = tuning.baseline_rate + tuning.modulation_depth;
    let gain = tuning.modulation_depth * tuning.speed_gain / config.velocity_process.speed_scale;
    let rate_of = |cos_pd: f64, sin_pd: f64, k: usize| -> f64 {
        // depth·cos(θ − pd)·speed/scale == depth·(v·u_pd)/scale
        let drive = velocity[[k, 0]] * cos_pd + velocity[[k, 1]] * sin_pd;
        let r = tuning.baseline_rate + gain * drive;
        let r = match config.nonlinearity {
            Nonlinearity::None => r,
            Nonlinearity::Saturating if ceiling > 0.0 => ceiling * (r / ceiling).tanh(),
            Nonlinearity::Saturating => r,
        };
        r.max(0.0)
    };

    let mut spikes = Vec::new();
    for (unit, &pd) in directions.iter().enumerate() {
        let (sin_pd, cos_pd) = pd.sin_cos();
        let peak = (0..n_kin).map(|k| rate_of(cos_pd, sin_pd, k)).fold(0.0, f64::max);
        if peak <= 0.0 {
            continue;
        }
        // thinning of a homogeneous process at the unit's peak rate
        let gap = Exp::new(peak).expect("positive rate");
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            if t >= config.duration {
                break;
            }
            let sub = ((t / SUBGRID_S) as usize).min(n_sub - 1);
            let r = rate_of(cos_pd, sin_pd, sub_to_kin[sub]);
            if rng.random::<f64>() * peak < r {
                spikes.push(SpikeEvent { unit, time: t });
            }
        }
    }
    spikes.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.unit.cmp(&b.unit)));

    let mut metadata = BTreeMap::new();
    metadata.insert("source".into(), "synthetic".into());
    metadata.insert("noise_seed".into(), config.noise_seed.to_string());
    let ds = NeuralDataset {
        spike_events: Some(spikes),
        n_units: config.n_units,
        continuous: None,
        kinematics: velocity,
        kin_rate_hz: config.bin_hint_hz,
        duration: config.duration,
        metadata,
    };
    ds.validate()?;
    Ok(ds)
}

/// Two cascaded first-order smoothers driven by white noise, rescaled so the
/// RMS speed equals `speed_scale`.
fn smoothed_velocity(rng: &mut ChaCha8Rng, n: usize, config: &SynthConfig) -> Array2<f64> {
    let dt = 1.0 / config.bin_hint_hz;
    let a = (-dt / config.velocity_process.smoothing_tau).exp();
    let mut v = Array2::<f64>::zeros((n, 2));
    let mut stage1 = [0.0f64; 2];
    let mut stage2 = [0.0f64; 2];
    // burn-in so the process starts near stationarity
    let burn = (5.0 * config.velocity_process.smoothing_tau / dt).ceil() as usize;
    for i in 0..(burn + n) {
        for d in 0..2 {
            let xi: f64 = rng.sample(StandardNormal);
            stage1[d] = a * stage1[d] + (1.0 - a) * xi;
            stage2[d] = a * stage2[d] + (1.0 - a) * stage1[d];
            if i >= burn {
                v[[i - burn, d]] = stage2[d];
            }
        }
    }
    // mean of speed² = vx² + vy² over samples
    let ms: f64 = v.iter().map(|x| x * x).sum::<f64>() / n.max(1) as f64;
    let rms_speed = ms.sqrt();
    if rms_speed > 0.0 {
        let s = config.velocity_process.speed_scale / rms_speed;
        v.mapv_inplace(|x| x * s);
    }
    v
}
