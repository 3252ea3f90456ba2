//! Benchmark configuration, read from versioned JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ccbr_core::classify::ClassifierSpec;
use ccbr_core::data::SynthConfig;
use ccbr_core::decode::CcbrConfig;
use ccbr_core::features::{SourceKind, ThresholdConfig};
use ccbr_core::reduce::PcSelector;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Directory in the CSV dataset layout.
    Path(PathBuf),
    Synth(SynthConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub source_kind: SourceKind,
    /// Seconds.
    pub bin_width: f64,
    pub lags_before: usize,
    #[serde(default)]
    pub lags_after: usize,
    /// Detector settings for `threshold_crossing`; defaults to 4.5 robust
    /// SDs with a 1 ms refractory period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderSpec {
    Ccbr(CcbrConfig),
    Wiener { ridge: f64 },
    WienerCascade { ridge: f64, degree: usize },
}

impl DecoderSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            DecoderSpec::Ccbr(_) => "ccbr",
            DecoderSpec::Wiener { .. } => "wiener",
            DecoderSpec::WienerCascade { .. } => "wiener_cascade",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldConfig {
    pub n_folds: usize,
    pub val_fraction: f64,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self { n_folds: 10, val_fraction: 0.1 }
    }
}

/// Named full-factorial grid. Absent axes keep the decoder's own value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// Quantization levels (QL).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    /// Classifier regularization factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcs: Option<Vec<usize>>,
    /// Post-training weight bit width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<Vec<u32>>,
    /// Post-training pruning fraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<Vec<f64>>,
    /// Number of leading input channels kept before lag embedding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_count: Option<Vec<usize>>,
    /// Evaluate only these fold indices; all folds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<Vec<usize>>,
}

impl SweepGrid {
    fn axes_present(&self) -> usize {
        [
            self.levels.as_ref().map(Vec::len),
            self.c.as_ref().map(Vec::len),
            self.pcs.as_ref().map(Vec::len),
            self.bits.as_ref().map(Vec::len),
            self.sparsity.as_ref().map(Vec::len),
            self.channel_count.as_ref().map(Vec::len),
        ]
        .iter()
        .flatten()
        .count()
    }

    /// True when some axis changes CCBR hyperparameters.
    pub fn touches_ccbr(&self) -> bool {
        self.levels.is_some() || self.c.is_some() || self.pcs.is_some() || self.bits.is_some() || self.sparsity.is_some()
    }

    /// Full factorial in a fixed order (channel count outermost, sparsity
    /// innermost).
    pub fn points(&self) -> Vec<SweepPoint> {
        fn axis<T: Copy>(v: &Option<Vec<T>>) -> Vec<Option<T>> {
            match v {
                Some(vals) => vals.iter().copied().map(Some).collect(),
                None => vec![None],
            }
        }
        let mut out = Vec::new();
        for channel_count in axis(&self.channel_count) {
            for pcs in axis(&self.pcs) {
                for c in axis(&self.c) {
                    for levels in axis(&self.levels) {
                        for bits in axis(&self.bits) {
                            for sparsity in axis(&self.sparsity) {
                                out.push(SweepPoint {
                                    levels,
                                    c,
                                    pcs,
                                    bits,
                                    sparsity,
                                    channel_count,
                                    ..SweepPoint::default()
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(format!("grid `{name}`: {m}")));
        if self.axes_present() == 0 {
            return bad("no axes".into());
        }
        let empty = [
            ("levels", self.levels.as_ref().map(Vec::is_empty)),
            ("c", self.c.as_ref().map(Vec::is_empty)),
            ("pcs", self.pcs.as_ref().map(Vec::is_empty)),
            ("bits", self.bits.as_ref().map(Vec::is_empty)),
            ("sparsity", self.sparsity.as_ref().map(Vec::is_empty)),
            ("channel_count", self.channel_count.as_ref().map(Vec::is_empty)),
            ("folds", self.folds.as_ref().map(Vec::is_empty)),
        ];
        if let Some((axis, _)) = empty.iter().find(|(_, e)| *e == Some(true)) {
            return bad(format!("axis `{axis}` is empty"));
        }
        if self.levels.iter().flatten().any(|&l| l < 2) {
            return bad("levels must be >= 2".into());
        }
        if self.c.iter().flatten().any(|&c| !(c > 0.0 && c.is_finite())) {
            return bad("c must be positive".into());
        }
        if self.pcs.iter().flatten().any(|&p| p == 0) || self.channel_count.iter().flatten().any(|&n| n == 0) {
            return bad("pcs and channel_count must be >= 1".into());
        }
        if self.sparsity.iter().flatten().any(|&s| !(0.0..1.0).contains(&s)) {
            return bad("sparsity must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// One cell of a sweep; unset fields keep the configured value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

impl SweepPoint {
    pub fn is_base(&self) -> bool {
        *self == SweepPoint::default()
    }

    /// `key=value` pairs joined by commas; empty for the base point.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = self.channel_count {
            parts.push(format!("channel_count={v}"));
        }
        if let Some(v) = self.pcs {
            parts.push(format!("pcs={v}"));
        }
        if let Some(v) = self.c {
            parts.push(format!("c={v}"));
        }
        if let Some(v) = self.levels {
            parts.push(format!("levels={v}"));
        }
        if let Some(v) = self.bits {
            parts.push(format!("bits={v}"));
        }
        if let Some(v) = self.sparsity {
            parts.push(format!("sparsity={v}"));
        }
        if let Some(v) = self.ridge {
            parts.push(format!("ridge={v}"));
        }
        if let Some(v) = self.degree {
            parts.push(format!("degree={v}"));
        }
        parts.join(",")
    }

    /// Decoder configuration after applying this point.
    pub fn apply(&self, spec: &DecoderSpec) -> DecoderSpec {
        match spec {
            DecoderSpec::Ccbr(cfg) => {
                let mut cfg = cfg.clone();
                if let Some(l) = self.levels {
                    cfg.levels = l;
                }
                if let Some(c) = self.c {
                    cfg.classifier = cfg.classifier.with_c(c);
                    cfg.error_classifier = cfg.error_classifier.map(|e| e.with_c(c));
                }
                if let Some(p) = self.pcs {
                    cfg.pc_selector = PcSelector::Fixed(p);
                }
                DecoderSpec::Ccbr(cfg)
            }
            DecoderSpec::Wiener { ridge } => DecoderSpec::Wiener { ridge: self.ridge.unwrap_or(*ridge) },
            DecoderSpec::WienerCascade { ridge, degree } => DecoderSpec::WienerCascade {
                ridge: self.ridge.unwrap_or(*ridge),
                degree: self.degree.unwrap_or(*degree),
            },
        }
    }
}

/// Baseline tuning grid for the training-time comparison. Degree 1 is the
/// plain Wiener filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    pub ridge: Vec<f64>,
    pub degree: Vec<usize>,
    /// Fold indices to time on; all folds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<Vec<usize>>,
}

impl TimingConfig {
    pub fn grid_size(&self) -> usize {
        self.ridge.len() * self.degree.len()
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::with_capacity(self.grid_size());
        for &ridge in &self.ridge {
            for &degree in &self.degree {
                out.push(SweepPoint {
                    ridge: Some(ridge),
                    degree: Some(degree),
                    ..SweepPoint::default()
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub schema_version: u32,
    pub dataset: DatasetSource,
    pub features: FeatureConfig,
    pub decoders: Vec<DecoderSpec>,
    #[serde(default)]
    pub folds: FoldConfig,
    #[serde(default)]
    pub sweeps: BTreeMap<String, SweepGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingConfig>,
    /// Replaces the noise seed of a synthetic dataset.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("bench-out")
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<u32>,
}

impl BenchConfig {
    /// Reference desk-scale session: 100 cosine-tuned units over 800 s,
    /// 50 ms spike-count bins with 15 bins of history, CCBR on 10 PCs
    /// against both Wiener baselines.
    pub fn reference() -> Self {
        let ccbr = CcbrConfig {
            levels: 32,
            classifier: ClassifierSpec::Logistic { c: 1.0 },
            pc_selector: PcSelector::Fixed(10),
            ..CcbrConfig::default()
        };
        let mut sweeps = BTreeMap::new();
        sweeps.insert(
            "robustness".to_string(),
            SweepGrid {
                c: Some(vec![0.1, 1.0, 10.0]),
                levels: Some(vec![8, 16, 32, 64]),
                folds: Some(vec![0, 4, 8]),
                ..SweepGrid::default()
            },
        );
        sweeps.insert(
            "pcs".to_string(),
            SweepGrid {
                pcs: Some(vec![2, 5, 10, 20]),
                folds: Some(vec![0, 4, 8]),
                ..SweepGrid::default()
            },
        );
        sweeps.insert(
            "channels".to_string(),
            SweepGrid {
                channel_count: Some(vec![25, 50, 100]),
                folds: Some(vec![0, 4, 8]),
                ..SweepGrid::default()
            },
        );
        sweeps.insert(
            "edge".to_string(),
            SweepGrid {
                bits: Some(vec![4, 8, 16]),
                sparsity: Some(vec![0.0, 0.3, 0.6]),
                folds: Some(vec![0]),
                ..SweepGrid::default()
            },
        );
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            dataset: DatasetSource::Synth(SynthConfig::reference()),
            features: FeatureConfig {
                source_kind: SourceKind::SpikeCount,
                bin_width: 0.05,
                lags_before: 15,
                lags_after: 0,
                threshold: None,
            },
            decoders: vec![
                DecoderSpec::Ccbr(ccbr),
                DecoderSpec::Wiener { ridge: 0.0 },
                DecoderSpec::WienerCascade { ridge: 1.0, degree: 3 },
            ],
            folds: FoldConfig::default(),
            sweeps,
            timing: Some(TimingConfig {
                ridge: vec![0.1, 1.0, 10.0, 100.0],
                degree: vec![1, 2, 3],
                folds: Some(vec![0, 5]),
            }),
            seed: 7,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe =
            serde_json::from_str(text).map_err(|e| BenchError::Config(format!("config is not valid JSON: {e}")))?;
        match probe.schema_version {
            Some(CONFIG_SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(BenchError::Config(format!(
                    "config schema version {v}, expected {CONFIG_SCHEMA_VERSION}"
                )))
            }
            None => return Err(BenchError::Config("config has no schema_version".into())),
        }
        let cfg: BenchConfig = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!("schema_version must be {CONFIG_SCHEMA_VERSION}"));
        }
        if self.decoders.is_empty() {
            return bad("at least one decoder is required".into());
        }
        let f = &self.features;
        if !(f.bin_width > 0.0 && f.bin_width.is_finite()) {
            return bad(format!("bin_width must be positive, got {}", f.bin_width));
        }
        for d in &self.decoders {
            match d {
                DecoderSpec::Ccbr(c) => c.validate()?,
                DecoderSpec::Wiener { ridge } | DecoderSpec::WienerCascade { ridge, .. } if !(*ridge >= 0.0) => {
                    return bad(format!("ridge must be nonnegative, got {ridge}"))
                }
                DecoderSpec::WienerCascade { degree: 0, .. } => return bad("cascade degree must be >= 1".into()),
                _ => {}
            }
        }
        if self.folds.n_folds < 2 {
            return bad(format!("n_folds must be >= 2, got {}", self.folds.n_folds));
        }
        if !(self.folds.val_fraction > 0.0 && self.folds.val_fraction < 0.5) {
            return bad(format!("val_fraction must lie in (0, 0.5), got {}", self.folds.val_fraction));
        }
        let check_folds = |which: &str, folds: &Option<Vec<usize>>| match folds {
            Some(v) if v.iter().any(|&i| i >= self.folds.n_folds) => Err(BenchError::Config(format!(
                "{which}: fold index out of range 0..{}",
                self.folds.n_folds
            ))),
            _ => Ok(()),
        };
        for (name, grid) in &self.sweeps {
            grid.validate(name)?;
            check_folds(name, &grid.folds)?;
        }
        if let Some(t) = &self.timing {
            if t.ridge.is_empty() || t.degree.is_empty() {
                return bad("timing grid axes must be non-empty".into());
            }
            if t.ridge.iter().any(|r| !(*r >= 0.0)) || t.degree.contains(&0) {
                return bad("timing grid needs ridge >= 0 and degree >= 1".into());
            }
            check_folds("timing", &t.folds)?;
        }
        if let DatasetSource::Synth(s) = &self.dataset {
            s.validate()?;
        }
        Ok(())
    }

    /// Synthetic generator settings with the benchmark seed applied.
    pub fn synth_config(&self) -> Option<SynthConfig> {
        match &self.dataset {
            DatasetSource::Synth(s) => Some(SynthConfig { noise_seed: self.seed, ..s.clone() }),
            DatasetSource::Path(_) => None,
        }
    }

    pub fn grid(&self, name: &str) -> Result<&SweepGrid> {
        self.sweeps.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.sweeps.keys().map(String::as_str).collect();
            BenchError::Config(format!("no sweep grid named `{name}` (known: {})", known.join(", ")))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips_through_json() {
        let cfg = BenchConfig::reference();
        let back = BenchConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn shipped_reference_config_is_current() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.json");
        assert_eq!(BenchConfig::load(&path).unwrap(), BenchConfig::reference());
    }

    #[test]
    fn missing_version_is_a_config_error() {
        let err = BenchConfig::from_json(r#"{"decoders": []}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn empty_decoders_rejected() {
        let mut cfg = BenchConfig::reference();
        cfg.decoders.clear();
        assert!(matches!(cfg.validate(), Err(BenchError::Config(_))));
    }

    #[test]
    fn empty_axis_rejected() {
        let mut cfg = BenchConfig::reference();
        cfg.sweeps.insert("bad".into(), SweepGrid { c: Some(vec![]), ..SweepGrid::default() });
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("`c`"), "{msg}");
    }

    #[test]
    fn factorial_order_and_size() {
        let grid = SweepGrid {
            c: Some(vec![0.1, 1.0, 10.0]),
            levels: Some(vec![8, 16, 32, 64]),
            ..SweepGrid::default()
        };
        let pts = grid.points();
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[0].label(), "c=0.1,levels=8");
        assert_eq!(pts[11].label(), "c=10,levels=64");
    }

    #[test]
    fn point_overrides_ccbr_fields() {
        let base = BenchConfig::reference().decoders[0].clone();
        let p = SweepPoint { c: Some(10.0), levels: Some(8), pcs: Some(3), ..SweepPoint::default() };
        let DecoderSpec::Ccbr(cfg) = p.apply(&base) else { panic!() };
        assert_eq!(cfg.levels, 8);
        assert_eq!(cfg.classifier, ClassifierSpec::Logistic { c: 10.0 });
        assert_eq!(cfg.pc_selector, PcSelector::Fixed(3));
    }

    #[test]
    fn partial_ccbr_config_uses_defaults() {
        let d: DecoderSpec = serde_json::from_str(r#"{"ccbr": {"levels": 16}}"#).unwrap();
        let DecoderSpec::Ccbr(cfg) = d else { panic!() };
        assert_eq!(cfg.levels, 16);
        assert_eq!(cfg.max_stages, CcbrConfig::default().max_stages);
    }
}
