//! Evaluation reports: per-cell records, fold aggregates and summaries.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, DecoderSpec, FeatureConfig, FoldConfig, SweepPoint};
use crate::error::Result;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Run,
    Sweep,
    Timing,
}

/// Everything that determined one cell's result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub decoder: DecoderSpec,
    pub features: FeatureConfig,
    pub folds: FoldConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub r2_per_dim: Vec<f64>,
    pub r2_mean: f64,
    /// Seconds spent fitting, including any stage or frontend selection.
    pub fit_wall_time: f64,
    pub predict_wall_time: f64,
    /// Accepted stages per output dimension (CCBR only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_stages: Option<Vec<usize>>,
    /// Stored parameter count.
    pub model_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub decoder: String,
    pub fold: usize,
    pub point: SweepPoint,
    pub config: CellConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<CellMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Fold statistics for one decoder at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub decoder: String,
    pub point: SweepPoint,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Mean of per-fold `r2_mean`; absent when every fold failed.
    pub r2_mean: Option<f64>,
    /// Sample standard deviation (divisor n − 1) across folds.
    pub r2_std: Option<f64>,
    pub r2_per_dim_mean: Vec<f64>,
    pub fit_time_total: f64,
    pub predict_time_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSpread {
    pub fold: usize,
    /// max − min of `r2_mean` over the grid points evaluated on this fold.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSummary {
    pub decoder: String,
    pub per_fold: Vec<FoldSpread>,
    pub max_fold_spread: f64,
    /// max − min over grid points of the fold-averaged `r2_mean`.
    pub spread_of_means: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPoint {
    pub fold: usize,
    pub point: SweepPoint,
    pub validation_r2: f64,
    pub test_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub ccbr_decoder: String,
    pub baseline: String,
    pub grid_size: usize,
    pub folds: Vec<usize>,
    /// Sum over folds of one CCBR fit each.
    pub ccbr_total: f64,
    /// Sum over folds of fitting and validation-scoring every grid point.
    pub grid_total: f64,
    /// `grid_total / ccbr_total`.
    pub ratio: f64,
    pub ccbr_r2_mean: f64,
    /// Test R² of the validation-selected grid point, averaged over folds.
    pub selected_r2_mean: f64,
    pub selected: Vec<SelectedPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub kind: ReportKind,
    pub environment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    pub config: BenchConfig,
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spreads: Vec<SpreadSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSummary>,
}

pub fn environment() -> String {
    format!(
        "ccbr-bench {}; {}; {}/{}; {} build",
        env!("CARGO_PKG_VERSION"),
        env!("BENCH_RUSTC_VERSION"),
        std::env::consts::OS,
        std::env::consts::ARCH,
        if cfg!(debug_assertions) { "debug" } else { "optimized" },
    )
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some((mean, std))
}

/// Groups records by (decoder, point) in order of first appearance.
pub fn aggregate(records: &[Record]) -> Vec<Aggregate> {
    let mut keys: Vec<(&str, SweepPoint)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(d, p)| *d == r.decoder && *p == r.point) {
            keys.push((&r.decoder, r.point));
        }
    }
    keys.into_iter()
        .map(|(decoder, point)| {
            let cell: Vec<&Record> = records.iter().filter(|r| r.decoder == decoder && r.point == point).collect();
            let ok: Vec<&CellMetrics> = cell.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let r2: Vec<f64> = ok.iter().map(|m| m.r2_mean).collect();
            let stats = mean_std(&r2);
            let dims = ok.first().map_or(0, |m| m.r2_per_dim.len());
            let r2_per_dim_mean = (0..dims)
                .map(|k| ok.iter().map(|m| m.r2_per_dim[k]).sum::<f64>() / ok.len() as f64)
                .collect();
            Aggregate {
                decoder: decoder.to_string(),
                point,
                n_ok: ok.len(),
                n_failed: cell.len() - ok.len(),
                r2_mean: stats.map(|s| s.0),
                r2_std: stats.map(|s| s.1),
                r2_per_dim_mean,
                fit_time_total: ok.iter().map(|m| m.fit_wall_time).sum(),
                predict_time_total: ok.iter().map(|m| m.predict_wall_time).sum(),
            }
        })
        .collect()
}

/// Spread of `r2_mean` across grid points, per decoder.
pub fn spreads(records: &[Record], aggregates: &[Aggregate]) -> Vec<SpreadSummary> {
    let mut decoders: Vec<&str> = Vec::new();
    for a in aggregates {
        if !decoders.contains(&a.decoder.as_str()) {
            decoders.push(&a.decoder);
        }
    }
    let range = |vals: &[f64]| -> f64 {
        if vals.is_empty() {
            return 0.0;
        }
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    };
    decoders
        .into_iter()
        .map(|decoder| {
            let mut folds: Vec<usize> = records.iter().filter(|r| r.decoder == decoder).map(|r| r.fold).collect();
            folds.sort_unstable();
            folds.dedup();
            let per_fold: Vec<FoldSpread> = folds
                .into_iter()
                .map(|fold| {
                    let vals: Vec<f64> = records
                        .iter()
                        .filter(|r| r.decoder == decoder && r.fold == fold)
                        .filter_map(|r| r.metrics.as_ref().map(|m| m.r2_mean))
                        .collect();
                    FoldSpread { fold, spread: range(&vals) }
                })
                .collect();
            let means: Vec<f64> = aggregates.iter().filter(|a| a.decoder == decoder).filter_map(|a| a.r2_mean).collect();
            SpreadSummary {
                decoder: decoder.to_string(),
                max_fold_spread: per_fold.iter().map(|f| f.spread).fold(0.0, f64::max),
                per_fold,
                spread_of_means: range(&means),
            }
        })
        .collect()
}

impl EvalReport {
    pub fn new(kind: ReportKind, config: &BenchConfig, grid: Option<&str>, records: Vec<Record>) -> Self {
        let aggregates = aggregate(&records);
        let spreads = if kind == ReportKind::Sweep { spreads(&records, &aggregates) } else { Vec::new() };
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            kind,
            environment: environment(),
            grid: grid.map(str::to_string),
            config: config.clone(),
            records,
            aggregates,
            spreads,
            timing: None,
        }
    }

    pub fn all_failed(&self) -> bool {
        self.records.iter().all(|r| r.metrics.is_none())
    }

    pub fn first_error(&self) -> Option<&str> {
        self.records.iter().find_map(|r| r.error.as_deref())
    }

    pub fn aggregate_for(&self, decoder: &str, point: &SweepPoint) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.decoder == decoder && a.point == *point)
    }

    pub fn spread_for(&self, decoder: &str) -> Option<&SpreadSummary> {
        self.spreads.iter().find(|s| s.decoder == decoder)
    }

    /// Timing-free view of the results, stable across reruns.
    pub fn metrics_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            decoder: &'a str,
            fold: usize,
            point: &'a SweepPoint,
            r2_per_dim: Option<&'a [f64]>,
            r2_mean: Option<f64>,
            n_stages: Option<&'a [usize]>,
            model_size: Option<usize>,
            error: Option<&'a str>,
        }
        let rows: Vec<Row> = self
            .records
            .iter()
            .map(|r| Row {
                decoder: &r.decoder,
                fold: r.fold,
                point: &r.point,
                r2_per_dim: r.metrics.as_ref().map(|m| m.r2_per_dim.as_slice()),
                r2_mean: r.metrics.as_ref().map(|m| m.r2_mean),
                n_stages: r.metrics.as_ref().and_then(|m| m.n_stages.as_deref()),
                model_size: r.metrics.as_ref().map(|m| m.model_size),
                error: r.error.as_deref(),
            })
            .collect();
        Ok(serde_json::to_string(&rows)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One CSV row per record.
    pub fn records_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "decoder",
            "fold",
            "point",
            "r2_mean",
            "r2_per_dim",
            "fit_wall_time",
            "predict_wall_time",
            "n_stages",
            "model_size",
            "error",
        ])?;
        for r in &self.records {
            let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
            let row: Vec<String> = match &r.metrics {
                Some(m) => vec![
                    r.decoder.clone(),
                    r.fold.to_string(),
                    r.point.label(),
                    m.r2_mean.to_string(),
                    join(&m.r2_per_dim),
                    m.fit_wall_time.to_string(),
                    m.predict_wall_time.to_string(),
                    m.n_stages
                        .as_ref()
                        .map(|s| s.iter().map(usize::to_string).collect::<Vec<_>>().join(";"))
                        .unwrap_or_default(),
                    m.model_size.to_string(),
                    String::new(),
                ],
                None => {
                    let mut row = vec![r.decoder.clone(), r.fold.to_string(), r.point.label()];
                    row.extend(std::iter::repeat_n(String::new(), 6));
                    row.push(r.error.clone().unwrap_or_default());
                    row
                }
            };
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`, returning both paths.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&json, self.to_json()?)?;
        std::fs::write(&csv, self.records_csv()?)?;
        Ok((json, csv))
    }
}
