use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccbr_bench::data::load_or_generate;
use ccbr_bench::{emit_plot_value, BenchConfig, BenchError, EvalReport, Harness, PlotKind, Result};
use ccbr_core::data::{save_dataset, DatasetSchema};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bench", version, about = "Cross-validated benchmarks for CCBR and Wiener decoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every configured decoder on every fold.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a named sweep grid from the config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: String,
    },
    /// Compare one CCBR fit with the baseline grid search.
    Timing {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the configured synthetic dataset as CSV.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a report into plot-ready CSV.
    Plotdata {
        #[arg(long)]
        report: PathBuf,
        /// r2_bars, runtime_bars or sweep_heatmap.
        #[arg(long)]
        kind: String,
        /// Output file; defaults to `<kind>.csv` next to the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn summarize(report: &EvalReport) {
    for a in &report.aggregates {
        let point = a.point.label();
        let label = if point.is_empty() { a.decoder.clone() } else { format!("{} [{point}]", a.decoder) };
        match (a.r2_mean, a.r2_std) {
            (Some(m), Some(s)) => println!(
                "{label:<40} R² {m:.4} ± {s:.4}  fit {:.2}s  ({} ok, {} failed)",
                a.fit_time_total, a.n_ok, a.n_failed
            ),
            _ => println!("{label:<40} all {} folds failed", a.n_failed),
        }
    }
    for s in &report.spreads {
        println!("{}: max per-fold spread {:.4}, spread of fold means {:.4}", s.decoder, s.max_fold_spread, s.spread_of_means);
    }
    if let Some(t) = &report.timing {
        println!(
            "{} {:.2}s vs {} grid ({} points) {:.2}s: ratio {:.2}; R² {:.4} vs selected {:.4}",
            t.ccbr_decoder, t.ccbr_total, t.baseline, t.grid_size, t.grid_total, t.ratio, t.ccbr_r2_mean, t.selected_r2_mean
        );
    }
}

fn finish(report: EvalReport, dir: &Path, stem: &str) -> Result<()> {
    let (json, csv) = report.write(dir, stem)?;
    summarize(&report);
    println!("wrote {} and {}", json.display(), csv.display());
    if report.all_failed() {
        return Err(BenchError::AllCellsFailed {
            first: report.first_error().unwrap_or("no cells").to_string(),
        });
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config } => {
            let cfg = BenchConfig::load(&config)?;
            let dir = cfg.output_dir.clone();
            finish(Harness::new(cfg)?.run()?, &dir, "report")
        }
        Command::Sweep { config, grid } => {
            let cfg = BenchConfig::load(&config)?;
            let dir = cfg.output_dir.clone();
            cfg.grid(&grid)?;
            finish(Harness::new(cfg)?.sweep(&grid)?, &dir, &format!("sweep_{grid}"))
        }
        Command::Timing { config } => {
            let cfg = BenchConfig::load(&config)?;
            let dir = cfg.output_dir.clone();
            finish(Harness::new(cfg)?.compare_training_time()?, &dir, "timing")
        }
        Command::Synth { config, out } => {
            let cfg = BenchConfig::load(&config)?;
            if cfg.synth_config().is_none() {
                return Err(BenchError::Config("dataset is not synthetic".into()));
            }
            let ds = load_or_generate(&cfg)?;
            std::fs::create_dir_all(&out)?;
            save_dataset(&ds, &out, &DatasetSchema::default())?;
            println!("wrote synthetic dataset to {}", out.display());
            Ok(())
        }
        Command::Plotdata { report, kind, out } => {
            let kind: PlotKind = kind.parse()?;
            let text = std::fs::read_to_string(&report)
                .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", report.display())))?;
            let doc: serde_json::Value = serde_json::from_str(&text)?;
            let table = emit_plot_value(&doc, kind)?;
            let out = out.unwrap_or_else(|| {
                report.parent().unwrap_or(Path::new(".")).join(format!("{kind}.csv"))
            });
            std::fs::write(&out, table.to_csv()?)?;
            println!("wrote {} ({} rows)", out.display(), table.rows.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
