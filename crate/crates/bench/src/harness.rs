//! Cross-validated evaluation of decoders over folds and sweep points.

use std::rc::Rc;
use std::time::Instant;

use ccbr_core::classify::{prune_weights, quantize_weights, Classifier};
use ccbr_core::data::{make_folds, FoldSplit, NeuralDataset};
use ccbr_core::decode::{
    ccbr_fit_rows_with, r_squared, wiener_cascade_fit, wiener_fit, CcbrConfig, CcbrModel, Frontend, SpecTrainer,
    WienerModel,
};
use ndarray::{Array2, ArrayView2};

use crate::config::{BenchConfig, DecoderSpec, SweepPoint};
use crate::data::{load_or_generate, AccessLog, FoldData, Prepared, TrackedRows};
use crate::error::{BenchError, Result};
use crate::report::{CellConfig, CellMetrics, EvalReport, Record, ReportKind, SelectedPoint, TimingSummary};

fn seconds(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Frontend and PCA scores for one fold, shared by sweep points that only
/// change stage settings.
struct CachedFrontend {
    frontend: Frontend,
    s_train: Array2<f64>,
    s_val: Array2<f64>,
    s_test: Array2<f64>,
    fit_time: f64,
    test_time: f64,
}

#[derive(Default)]
struct FrontendCache {
    entries: Vec<(String, std::result::Result<Rc<CachedFrontend>, String>)>,
}

impl FrontendCache {
    fn get(&mut self, cfg: &CcbrConfig, d: &FoldData) -> Result<Rc<CachedFrontend>> {
        let key = format!("{:?}/{}", cfg.pc_selector, cfg.standardize);
        if let Some((_, hit)) = self.entries.iter().find(|(k, _)| *k == key) {
            return hit.clone().map_err(|e| BenchError::Core(ccbr_core::Error::Fit(e)));
        }
        let fitted = (|| -> Result<CachedFrontend> {
            let t = Instant::now();
            let frontend = Frontend::fit(d.x_train.view(), cfg.standardize, cfg.pc_selector)?;
            let s_train = frontend.scores(d.x_train.view())?;
            let s_val = frontend.scores(d.x_val.view())?;
            let fit_time = seconds(t);
            let t = Instant::now();
            let s_test = frontend.scores(d.x_test.view())?;
            let test_time = seconds(t);
            Ok(CachedFrontend { frontend, s_train, s_val, s_test, fit_time, test_time })
        })();
        let entry = fitted.map(Rc::new).map_err(|e| e.to_string());
        self.entries.push((key, entry.clone()));
        entry.map_err(|e| BenchError::Core(ccbr_core::Error::Fit(e)))
    }
}

fn compress(c: &Classifier, bits: Option<u32>, sparsity: Option<f64>) -> Result<Classifier> {
    match c {
        Classifier::Linear(m) => {
            let mut m = m.clone();
            if let Some(s) = sparsity {
                m = prune_weights(&m, s)?.0;
            }
            if let Some(b) = bits {
                m = quantize_weights(&m, b)?;
            }
            Ok(Classifier::Linear(m))
        }
        Classifier::Tree(t) if sparsity.is_none() => Ok(Classifier::Tree(quantize_weights(t, bits.expect("bits or sparsity is set"))?)),
        Classifier::Compact { inner, classes, n_classes } => Ok(Classifier::Compact {
            inner: Box::new(compress(inner, bits, sparsity)?),
            classes: classes.clone(),
            n_classes: *n_classes,
        }),
        _ => Err(BenchError::Config(
            "weight compression needs a linear classifier backend".into(),
        )),
    }
}

fn ccbr_size(models: &[CcbrModel]) -> usize {
    let Some(first) = models.first() else { return 0 };
    let fe = &first.frontend;
    let frontend = fe.pca.components.len() + fe.pca.mean.len() + fe.standardizer.as_ref().map_or(0, |s| 2 * s.mean.len());
    frontend
        + models
            .iter()
            .flat_map(|m| &m.stages)
            .map(|s| s.classifier.parameter_count() + s.quantizer.centers.len())
            .sum::<usize>()
}

fn ccbr_cell(cfg: &CcbrConfig, point: &SweepPoint, d: &FoldData, cache: &mut FrontendCache) -> Result<CellMetrics> {
    let fe = cache.get(cfg, d)?;
    let trainer = SpecTrainer::from_config(cfg);
    let t = Instant::now();
    let mut models = Vec::with_capacity(d.y_train.ncols());
    for k in 0..d.y_train.ncols() {
        models.push(CcbrModel::fit_scores(
            fe.frontend.clone(),
            fe.s_train.view(),
            d.y_train.column(k),
            fe.s_val.view(),
            d.y_val.column(k),
            cfg,
            &trainer,
        )?);
    }
    if point.bits.is_some() || point.sparsity.is_some() {
        for stage in models.iter_mut().flat_map(|m| m.stages.iter_mut()) {
            stage.classifier = compress(&stage.classifier, point.bits, point.sparsity)?;
        }
    }
    let fit_wall_time = fe.fit_time + seconds(t);

    let t = Instant::now();
    let mut pred = Array2::zeros(d.y_test.dim());
    for (k, m) in models.iter().enumerate() {
        pred.column_mut(k).assign(&m.predict_scores(fe.s_test.view())?);
    }
    let predict_wall_time = fe.test_time + seconds(t);
    let r2 = r_squared(d.y_test.view(), pred.view())?;
    Ok(CellMetrics {
        r2_per_dim: r2.per_dim,
        r2_mean: r2.mean,
        fit_wall_time,
        predict_wall_time,
        n_stages: Some(models.iter().map(CcbrModel::n_stages).collect()),
        model_size: ccbr_size(&models),
    })
}

fn wiener_cell(fit: impl FnOnce(ArrayView2<f64>, ArrayView2<f64>) -> ccbr_core::Result<WienerModel>, d: &FoldData) -> Result<CellMetrics> {
    let t = Instant::now();
    let model = fit(d.x_train.view(), d.y_train.view())?;
    let fit_wall_time = seconds(t);
    let t = Instant::now();
    let pred = model.predict(d.x_test.view())?;
    let predict_wall_time = seconds(t);
    let r2 = r_squared(d.y_test.view(), pred.view())?;
    Ok(CellMetrics {
        r2_per_dim: r2.per_dim,
        r2_mean: r2.mean,
        fit_wall_time,
        predict_wall_time,
        n_stages: None,
        model_size: model.parameter_count(),
    })
}

fn evaluate_cell(spec: &DecoderSpec, point: &SweepPoint, d: &FoldData, cache: &mut FrontendCache) -> Result<CellMetrics> {
    match spec {
        DecoderSpec::Ccbr(cfg) => ccbr_cell(cfg, point, d, cache),
        DecoderSpec::Wiener { ridge } => wiener_cell(|x, y| wiener_fit(x, y, *ridge), d),
        DecoderSpec::WienerCascade { ridge, degree } => wiener_cell(|x, y| wiener_cascade_fit(x, y, *ridge, *degree), d),
    }
}

/// Prepared benchmark: dataset features, folds and an access log.
pub struct Harness {
    config: BenchConfig,
    prepared: Prepared,
    folds: Vec<FoldSplit>,
    log: AccessLog,
}

impl Harness {
    pub fn new(config: BenchConfig) -> Result<Self> {
        config.validate()?;
        let ds = load_or_generate(&config)?;
        Self::with_dataset(config, &ds)
    }

    /// Uses `dataset` instead of the configured source.
    pub fn with_dataset(config: BenchConfig, dataset: &NeuralDataset) -> Result<Self> {
        config.validate()?;
        let prepared = Prepared::new(dataset, &config.features)?;
        let folds = make_folds(prepared.n_rows(), config.folds.n_folds, config.folds.val_fraction)?;
        Ok(Self { config, prepared, folds, log: AccessLog::default() })
    }

    pub fn config(&self) -> &BenchConfig {
        &self.config
    }

    pub fn folds(&self) -> &[FoldSplit] {
        &self.folds
    }

    pub fn access_log(&self) -> &AccessLog {
        &self.log
    }

    /// Decoder labels: the decoder kind, suffixed with `#n` for repeats.
    pub fn decoder_labels(&self) -> Vec<(String, DecoderSpec)> {
        let decoders = &self.config.decoders;
        decoders
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let kind = d.kind();
                let nth = decoders[..i].iter().filter(|o| o.kind() == kind).count();
                let label = if nth == 0 { kind.to_string() } else { format!("{kind}#{}", nth + 1) };
                (label, d.clone())
            })
            .collect()
    }

    fn cell_config(&self, decoder: DecoderSpec) -> CellConfig {
        CellConfig {
            decoder,
            features: self.config.features.clone(),
            folds: self.config.folds,
            seed: self.config.seed,
        }
    }

    fn evaluate(&self, decoders: &[(String, DecoderSpec)], points: &[SweepPoint], fold_ids: &[usize]) -> Vec<Record> {
        let mut records = Vec::new();
        let mut channel_groups: Vec<Option<usize>> = Vec::new();
        for p in points {
            if !channel_groups.contains(&p.channel_count) {
                channel_groups.push(p.channel_count);
            }
        }
        for &fi in fold_ids {
            let fold = &self.folds[fi];
            for &cc in &channel_groups {
                let group: Vec<&SweepPoint> = points.iter().filter(|p| p.channel_count == cc).collect();
                let design = self.prepared.design(cc);
                let data = design
                    .as_ref()
                    .map(|x| FoldData::extract(&TrackedRows::new(x.view(), self.prepared.targets(), &self.log), fold));
                let mut cache = FrontendCache::default();
                for point in group {
                    for (label, spec) in decoders {
                        let effective = point.apply(spec);
                        let outcome = match &data {
                            Ok(d) => evaluate_cell(&effective, point, d, &mut cache),
                            Err(e) => Err(BenchError::Config(e.to_string())),
                        };
                        let (metrics, error) = match outcome {
                            Ok(m) => (Some(m), None),
                            Err(e) => (None, Some(e.to_string())),
                        };
                        records.push(Record {
                            decoder: label.clone(),
                            fold: fi,
                            point: *point,
                            config: self.cell_config(effective),
                            metrics,
                            error,
                        });
                    }
                }
            }
        }
        records
    }

    fn all_folds(&self) -> Vec<usize> {
        (0..self.folds.len()).collect()
    }

    /// Every decoder on every fold: fit on train, select on validation,
    /// score on test.
    pub fn run(&self) -> Result<EvalReport> {
        let records = self.evaluate(&self.decoder_labels(), &[SweepPoint::default()], &self.all_folds());
        Ok(EvalReport::new(ReportKind::Run, &self.config, None, records))
    }

    /// Full-factorial evaluation of the named grid. CCBR decoders are swept
    /// on every axis; baselines join only when the grid varies channel count.
    pub fn sweep(&self, name: &str) -> Result<EvalReport> {
        let grid = self.config.grid(name)?;
        let decoders: Vec<(String, DecoderSpec)> = self
            .decoder_labels()
            .into_iter()
            .filter(|(_, d)| matches!(d, DecoderSpec::Ccbr(_)) || grid.channel_count.is_some())
            .collect();
        if decoders.is_empty() || (grid.touches_ccbr() && !decoders.iter().any(|(_, d)| matches!(d, DecoderSpec::Ccbr(_)))) {
            return Err(BenchError::Config(format!("grid `{name}` varies CCBR settings but no ccbr decoder is configured")));
        }
        let fold_ids = grid.folds.clone().unwrap_or_else(|| self.all_folds());
        let records = self.evaluate(&decoders, &grid.points(), &fold_ids);
        Ok(EvalReport::new(ReportKind::Sweep, &self.config, Some(name), records))
    }

    /// Sweep over C × QL; the grid must hold at least two values of each.
    pub fn sweep_robustness(&self, name: &str) -> Result<EvalReport> {
        let grid = self.config.grid(name)?;
        let n_c = grid.c.as_ref().map_or(0, Vec::len);
        let n_ql = grid.levels.as_ref().map_or(0, Vec::len);
        if n_c < 2 || n_ql < 2 {
            return Err(BenchError::Config(format!(
                "robustness grid `{name}` needs at least 2 values of both c and levels (has {n_c} and {n_ql})"
            )));
        }
        self.sweep(name)
    }

    /// Times one CCBR fit against fitting and validating every point of the
    /// baseline Wiener-cascade grid, on the same folds.
    pub fn compare_training_time(&self) -> Result<EvalReport> {
        let timing = self
            .config
            .timing
            .as_ref()
            .ok_or_else(|| BenchError::Config("no timing grid configured".into()))?;
        if timing.grid_size() < 12 {
            return Err(BenchError::Config(format!(
                "baseline tuning grid has {} configurations; at least 12 are required",
                timing.grid_size()
            )));
        }
        let (ccbr_label, ccbr_cfg) = self
            .decoder_labels()
            .into_iter()
            .find_map(|(l, d)| match d {
                DecoderSpec::Ccbr(c) => Some((l, c)),
                _ => None,
            })
            .ok_or_else(|| BenchError::Config("timing comparison needs a ccbr decoder".into()))?;
        let baseline = "wiener_cascade".to_string();
        let fold_ids = timing.folds.clone().unwrap_or_else(|| self.all_folds());
        let x = self.prepared.design(None)?;
        let rows = TrackedRows::new(x.view(), self.prepared.targets(), &self.log);

        let mut records = Vec::new();
        let (mut ccbr_total, mut grid_total) = (0.0, 0.0);
        let mut ccbr_r2 = Vec::new();
        let mut selected = Vec::new();
        for &fi in &fold_ids {
            let d = FoldData::extract(&rows, &self.folds[fi]);
            let base = SweepPoint::default();
            let outcome = (|| -> Result<CellMetrics> {
                let t = Instant::now();
                let models = ccbr_fit_rows_with(
                    d.x_train.view(),
                    d.y_train.view(),
                    d.x_val.view(),
                    d.y_val.view(),
                    &ccbr_cfg,
                    &SpecTrainer::from_config(&ccbr_cfg),
                )?;
                let fit_wall_time = seconds(t);
                let t = Instant::now();
                let pred = ccbr_core::decode::ccbr_predict(&models, d.x_test.view())?;
                let predict_wall_time = seconds(t);
                let r2 = r_squared(d.y_test.view(), pred.view())?;
                Ok(CellMetrics {
                    r2_per_dim: r2.per_dim,
                    r2_mean: r2.mean,
                    fit_wall_time,
                    predict_wall_time,
                    n_stages: Some(models.iter().map(CcbrModel::n_stages).collect()),
                    model_size: ccbr_size(&models),
                })
            })();
            if let Ok(m) = &outcome {
                ccbr_total += m.fit_wall_time;
                ccbr_r2.push(m.r2_mean);
            }
            records.push(self.record(&ccbr_label, fi, base, DecoderSpec::Ccbr(ccbr_cfg.clone()), outcome));

            let mut best: Option<SelectedPoint> = None;
            for point in timing.points() {
                let (ridge, degree) = (point.ridge.expect("grid point"), point.degree.expect("grid point"));
                let mut val_r2 = None;
                let outcome = (|| -> Result<CellMetrics> {
                    let t = Instant::now();
                    let model = wiener_cascade_fit(d.x_train.view(), d.y_train.view(), ridge, degree)?;
                    let fit_wall_time = seconds(t);
                    let t = Instant::now();
                    let v = r_squared(d.y_val.view(), model.predict(d.x_val.view())?.view())?.mean;
                    grid_total += fit_wall_time + seconds(t);
                    val_r2 = Some(v);
                    let t = Instant::now();
                    let pred = model.predict(d.x_test.view())?;
                    let predict_wall_time = seconds(t);
                    let r2 = r_squared(d.y_test.view(), pred.view())?;
                    Ok(CellMetrics {
                        r2_per_dim: r2.per_dim,
                        r2_mean: r2.mean,
                        fit_wall_time,
                        predict_wall_time,
                        n_stages: None,
                        model_size: model.parameter_count(),
                    })
                })();
                if let (Ok(m), Some(v)) = (&outcome, val_r2) {
                    if best.as_ref().is_none_or(|b| v > b.validation_r2) {
                        best = Some(SelectedPoint { fold: fi, point, validation_r2: v, test_r2: m.r2_mean });
                    }
                }
                records.push(self.record(&baseline, fi, point, DecoderSpec::WienerCascade { ridge, degree }, outcome));
            }
            selected.extend(best);
        }

        let mut report = EvalReport::new(ReportKind::Timing, &self.config, None, records);
        if ccbr_r2.is_empty() || selected.is_empty() {
            return Err(BenchError::AllCellsFailed {
                first: report.first_error().unwrap_or("no folds evaluated").to_string(),
            });
        }
        report.timing = Some(TimingSummary {
            ccbr_decoder: ccbr_label,
            baseline,
            grid_size: timing.grid_size(),
            folds: fold_ids,
            ccbr_total,
            grid_total,
            ratio: grid_total / ccbr_total,
            ccbr_r2_mean: ccbr_r2.iter().sum::<f64>() / ccbr_r2.len() as f64,
            selected_r2_mean: selected.iter().map(|s| s.test_r2).sum::<f64>() / selected.len() as f64,
            selected,
        });
        Ok(report)
    }

    fn record(&self, label: &str, fold: usize, point: SweepPoint, spec: DecoderSpec, outcome: Result<CellMetrics>) -> Record {
        let (metrics, error) = match outcome {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Record {
            decoder: label.to_string(),
            fold,
            point,
            config: self.cell_config(spec),
            metrics,
            error,
        }
    }
}

pub fn run_benchmark(config: &BenchConfig) -> Result<EvalReport> {
    Harness::new(config.clone())?.run()
}

pub fn sweep_robustness(config: &BenchConfig, grid: &str) -> Result<EvalReport> {
    Harness::new(config.clone())?.sweep_robustness(grid)
}

pub fn compare_training_time(config: &BenchConfig) -> Result<EvalReport> {
    Harness::new(config.clone())?.compare_training_time()
}
