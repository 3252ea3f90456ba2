#![allow(dead_code)]

use std::collections::BTreeMap;

use ccbr_bench::{BenchConfig, DatasetSource, DecoderSpec, FeatureConfig, FoldConfig, Harness, SweepGrid, TimingConfig};
use ccbr_core::classify::ClassifierSpec;
use ccbr_core::data::SynthConfig;
use ccbr_core::decode::CcbrConfig;
use ccbr_core::features::SourceKind;
use ccbr_core::reduce::PcSelector;

/// A few minutes of a small cosine-tuned population, cheap enough for
/// per-test evaluation.
pub fn small_config() -> BenchConfig {
    let mut synth = SynthConfig::reference();
    synth.n_units = 40;
    synth.duration = 150.0;
    let mut sweeps = BTreeMap::new();
    sweeps.insert(
        "small".to_string(),
        SweepGrid {
            c: Some(vec![0.1, 1.0, 10.0]),
            levels: Some(vec![8, 16, 32, 64]),
            folds: Some(vec![0, 2]),
            ..SweepGrid::default()
        },
    );
    BenchConfig {
        schema_version: 1,
        dataset: DatasetSource::Synth(synth),
        features: FeatureConfig {
            source_kind: SourceKind::SpikeCount,
            bin_width: 0.05,
            lags_before: 3,
            lags_after: 0,
            threshold: None,
        },
        decoders: vec![
            DecoderSpec::Ccbr(CcbrConfig {
                levels: 16,
                classifier: ClassifierSpec::Logistic { c: 1.0 },
                pc_selector: PcSelector::Fixed(6),
                ..CcbrConfig::default()
            }),
            DecoderSpec::Wiener { ridge: 0.0 },
            DecoderSpec::WienerCascade { ridge: 1.0, degree: 3 },
        ],
        folds: FoldConfig { n_folds: 4, val_fraction: 0.1 },
        sweeps,
        timing: Some(TimingConfig {
            ridge: vec![0.1, 1.0, 10.0, 100.0],
            degree: vec![1, 2, 3],
            folds: Some(vec![1]),
        }),
        seed: 11,
        output_dir: "bench-out".into(),
    }
}

pub fn small_harness() -> Harness {
    Harness::new(small_config()).unwrap()
}
