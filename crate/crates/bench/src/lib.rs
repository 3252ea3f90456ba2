//! Benchmark harness for the CCBR decoder and its Wiener baselines:
//! cross-validated accuracy, hyperparameter sweeps, training-time
//! comparison and plot-ready CSV output.

pub mod config;
pub mod data;
pub mod error;
pub mod harness;
pub mod plot;
pub mod report;

pub use config::{BenchConfig, DatasetSource, DecoderSpec, FeatureConfig, FoldConfig, SweepGrid, SweepPoint, TimingConfig};
pub use error::{BenchError, Result};
pub use harness::{compare_training_time, run_benchmark, sweep_robustness, Harness};
pub use plot::{emit_plot_data, emit_plot_value, PlotKind, PlotTable};
pub use report::{EvalReport, ReportKind};
