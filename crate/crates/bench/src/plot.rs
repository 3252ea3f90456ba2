//! Plot-ready CSV tables derived from a report document.

use std::fmt;
use std::str::FromStr;

use serde_json::Value;

use crate::config::SweepPoint;
use crate::error::{BenchError, Result};
use crate::report::EvalReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    R2Bars,
    RuntimeBars,
    SweepHeatmap,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::R2Bars => "r2_bars",
            PlotKind::RuntimeBars => "runtime_bars",
            PlotKind::SweepHeatmap => "sweep_heatmap",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r2_bars" => Ok(PlotKind::R2Bars),
            "runtime_bars" => Ok(PlotKind::RuntimeBars),
            "sweep_heatmap" => Ok(PlotKind::SweepHeatmap),
            other => Err(BenchError::Config(format!(
                "unknown plot kind `{other}` (expected r2_bars, runtime_bars or sweep_heatmap)"
            ))),
        }
    }
}

/// A CSV table with `#` comment lines above the header.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl PlotTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column values; panics on non-numeric cells.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column(name)?;
        Some(self.rows.iter().map(|r| r[j].parse().expect("numeric cell")).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let comments: Vec<String> = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim_start().to_string())
            .collect();
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { comments, header, rows })
    }
}

fn missing(field: impl Into<String>) -> BenchError {
    BenchError::Schema { field: field.into() }
}

fn get<'a>(v: &'a Value, path: &str) -> Result<&'a Value> {
    match v.get(path) {
        Some(Value::Null) | None => Err(missing(path)),
        Some(x) => Ok(x),
    }
}

fn num(v: &Value, path: &str) -> Result<f64> {
    get(v, path)?.as_f64().ok_or_else(|| missing(path))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    get(v, path)?.as_array().ok_or_else(|| missing(path))
}

fn text<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    get(v, path)?.as_str().ok_or_else(|| missing(path))
}

fn point(v: &Value, path: &str) -> Result<SweepPoint> {
    serde_json::from_value(get(v, path)?.clone()).map_err(|_| missing(path))
}

fn bar_label(decoder: &str, p: &SweepPoint) -> String {
    if p.is_base() {
        decoder.to_string()
    } else {
        format!("{decoder}[{}]", p.label())
    }
}

fn r2_bars(report: &Value) -> Result<PlotTable> {
    let aggs = array(report, "aggregates")?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (i, a) in aggs.iter().enumerate() {
        let at = |f: &str| format!("aggregates[{i}].{f}");
        let decoder = text(a, "decoder").map_err(|_| missing(at("decoder")))?;
        let p = point(a, "point").map_err(|_| missing(at("point")))?;
        let n_ok = get(a, "n_ok").ok().and_then(Value::as_u64).ok_or_else(|| missing(at("n_ok")))?;
        if n_ok == 0 {
            skipped.push(bar_label(decoder, &p));
            continue;
        }
        let mean = num(a, "r2_mean").map_err(|_| missing(at("r2_mean")))?;
        let std = num(a, "r2_std").map_err(|_| missing(at("r2_std")))?;
        rows.push(vec![bar_label(decoder, &p), mean.to_string(), std.to_string(), n_ok.to_string()]);
    }
    let mut comments = vec![
        "r2_bars: test R² per decoder across folds".to_string(),
        "decoder: decoder label, with the sweep point in brackets".to_string(),
        "mean: mean over folds of the per-fold mean R²".to_string(),
        "std: sample standard deviation (n - 1) of the per-fold mean R²".to_string(),
        "n_folds: folds that produced a result".to_string(),
    ];
    if !skipped.is_empty() {
        comments.push(format!("omitted, every fold failed: {}", skipped.join(" ")));
    }
    Ok(PlotTable {
        comments,
        header: ["decoder", "mean", "std", "n_folds"].map(String::from).to_vec(),
        rows,
    })
}

fn runtime_bars(report: &Value) -> Result<PlotTable> {
    let header = ["label", "total_fit_seconds", "n_fits"].map(String::from).to_vec();
    if let Some(t) = report.get("timing").filter(|t| !t.is_null()) {
        let at = |f: &str| format!("timing.{f}");
        let ccbr = text(t, "ccbr_decoder").map_err(|_| missing(at("ccbr_decoder")))?;
        let baseline = text(t, "baseline").map_err(|_| missing(at("baseline")))?;
        let n_folds = array(t, "folds").map_err(|_| missing(at("folds")))?.len();
        let grid = get(t, "grid_size").ok().and_then(Value::as_u64).ok_or_else(|| missing(at("grid_size")))?;
        let ccbr_total = num(t, "ccbr_total").map_err(|_| missing(at("ccbr_total")))?;
        let grid_total = num(t, "grid_total").map_err(|_| missing(at("grid_total")))?;
        return Ok(PlotTable {
            comments: vec![
                "runtime_bars: training wall time, single CCBR fit vs baseline grid search".to_string(),
                "label: decoder, or baseline followed by ' grid' for the full grid search".to_string(),
                "total_fit_seconds: summed over the timed folds; grid time includes validation scoring".to_string(),
                "n_fits: number of model fits summed".to_string(),
            ],
            header,
            rows: vec![
                vec![ccbr.to_string(), ccbr_total.to_string(), n_folds.to_string()],
                vec![format!("{baseline} grid"), grid_total.to_string(), (grid as usize * n_folds).to_string()],
            ],
        });
    }
    let aggs = array(report, "aggregates")?;
    let mut rows = Vec::new();
    for (i, a) in aggs.iter().enumerate() {
        let at = |f: &str| format!("aggregates[{i}].{f}");
        let decoder = text(a, "decoder").map_err(|_| missing(at("decoder")))?;
        let p = point(a, "point").map_err(|_| missing(at("point")))?;
        let total = num(a, "fit_time_total").map_err(|_| missing(at("fit_time_total")))?;
        let n_ok = get(a, "n_ok").ok().and_then(Value::as_u64).ok_or_else(|| missing(at("n_ok")))?;
        rows.push(vec![bar_label(decoder, &p), total.to_string(), n_ok.to_string()]);
    }
    Ok(PlotTable {
        comments: vec![
            "runtime_bars: training wall time per decoder".to_string(),
            "label: decoder label, with the sweep point in brackets".to_string(),
            "total_fit_seconds: fit wall time summed over successful folds".to_string(),
            "n_fits: successful folds".to_string(),
        ],
        header,
        rows,
    })
}

fn sweep_heatmap(report: &Value) -> Result<PlotTable> {
    let aggs = array(report, "aggregates")?;
    let mut cells = Vec::new();
    for (i, a) in aggs.iter().enumerate() {
        let at = |f: &str| format!("aggregates[{i}].{f}");
        let p = point(a, "point").map_err(|_| missing(at("point")))?;
        let c = p.c.ok_or_else(|| missing(at("point.c")))?;
        let levels = p.levels.ok_or_else(|| missing(at("point.levels")))?;
        let mean = num(a, "r2_mean").map_err(|_| missing(at("r2_mean")))?;
        let std = num(a, "r2_std").map_err(|_| missing(at("r2_std")))?;
        cells.push((c, levels, mean, std));
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(PlotTable {
        comments: vec![
            "sweep_heatmap: fold-mean test R² over the C x QL grid".to_string(),
            "c: classifier regularization factor".to_string(),
            "levels: quantization levels (QL)".to_string(),
            "r2_mean: mean over folds of the per-fold mean R²; r2_std: sample standard deviation".to_string(),
        ],
        header: ["c", "levels", "r2_mean", "r2_std"].map(String::from).to_vec(),
        rows: cells
            .into_iter()
            .map(|(c, l, m, s)| vec![c.to_string(), l.to_string(), m.to_string(), s.to_string()])
            .collect(),
    })
}

/// Builds the table for `kind` from a report JSON document.
pub fn emit_plot_value(report: &Value, kind: PlotKind) -> Result<PlotTable> {
    match kind {
        PlotKind::R2Bars => r2_bars(report),
        PlotKind::RuntimeBars => runtime_bars(report),
        PlotKind::SweepHeatmap => sweep_heatmap(report),
    }
}

pub fn emit_plot_data(report: &EvalReport, kind: PlotKind) -> Result<PlotTable> {
    emit_plot_value(&serde_json::to_value(report)?, kind)
}
