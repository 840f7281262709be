//! Command-line experiment runner: single cells, the full method grid, the
//! update-surface emitter, and the oracle self-checks.

use absmin::mnist::{load_dataset, resolve_data_dir, Dataset};
use absmin::network::{Activation, BackwardMode};
use absmin::trainer::{run_experiment, ExperimentConfig, ExperimentResult};
use absmin::update::{absmin_update, times_update, Quant, UpdateKind};
use absmin::verify::{self, SuiteReport};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::error::Error;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub type CliResult = Result<(), Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "absmin",
    version,
    about = "Train multilayer perceptrons with the pulse-coincidence sign*min weight update \
             and reproduce the MNIST method-comparison grid"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run one experiment cell; writes a per-epoch CSV and a summary JSON
    Train(TrainArgs),
    /// Run the full 2 methods x 2 backward modes x 3 gradation grid
    Table1(Table1Args),
    /// Emit a CSV comparing the product and sign*min update surfaces
    Surface(SurfaceArgs),
    /// Run the oracle self-check suites
    Check(CheckArgs),
}

fn parse_method(s: &str) -> Result<UpdateKind, String> {
    match s {
        "times" => Ok(UpdateKind::Times),
        "absmin" => Ok(UpdateKind::Absmin),
        other => Err(format!(
            "unknown method '{other}' (expected times | absmin)"
        )),
    }
}

fn parse_backward(s: &str) -> Result<BackwardMode, String> {
    match s {
        "transposed" => Ok(BackwardMode::Transposed),
        "const" => Ok(BackwardMode::Const),
        other => Err(format!(
            "unknown backward mode '{other}' (expected transposed | const)"
        )),
    }
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    match s {
        "relu" => Ok(Activation::Relu),
        "sigmoid" => Ok(Activation::Sigmoid),
        other => Err(format!(
            "unknown activation '{other}' (expected relu | sigmoid)"
        )),
    }
}

#[derive(Clone, Debug)]
pub struct ArchArg(pub Vec<usize>);

fn parse_arch(s: &str) -> Result<ArchArg, String> {
    let sizes: Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
    match sizes {
        Ok(v) if v.len() >= 2 && v.iter().all(|&n| n > 0) => Ok(ArchArg(v)),
        _ => Err(format!("bad architecture '{s}' (expected e.g. 784,110,10)")),
    }
}

/// Flags shared by `train` and `table1`; defaults are the standard protocol.
#[derive(Args, Clone)]
pub struct ProtocolArgs {
    /// Layer sizes, comma separated
    #[arg(long, default_value = "784,110,10", value_parser = parse_arch)]
    pub arch: ArchArg,
    /// Hidden activation: relu | sigmoid (output is always sigmoid)
    #[arg(long, default_value = "relu", value_parser = parse_activation)]
    pub activation: Activation,
    #[arg(long, default_value_t = 50)]
    pub epochs: u32,
    #[arg(long, default_value_t = 10)]
    pub trials: u32,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    /// Initial learning rate for the +10%/-30% schedule
    #[arg(long, default_value_t = 1e-4)]
    pub lr0: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory with the four MNIST IDX files (falls back to
    /// $MNIST_DATA_DIR, then the nearest data/ directory)
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
}

impl ProtocolArgs {
    fn config(&self, method: UpdateKind, backward: BackwardMode, quant: Quant) -> ExperimentConfig {
        let mut config = ExperimentConfig::new(method, backward, quant);
        config.arch = self.arch.0.clone();
        config.hidden_activation = self.activation;
        config.epochs = self.epochs;
        config.trials = self.trials;
        config.batch_size = self.batch_size;
        config.lr0 = self.lr0;
        config.seed = self.seed;
        config
    }

    fn load_data(&self) -> Result<(Dataset, Dataset), Box<dyn Error>> {
        let dir = resolve_data_dir(self.data_dir.as_deref());
        Ok(load_dataset(&dir)?)
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Update kernel: times | absmin
    #[arg(long, default_value = "times", value_parser = parse_method)]
    pub method: UpdateKind,
    /// Error routing: transposed | const
    #[arg(long, default_value = "transposed", value_parser = parse_backward)]
    pub backward: BackwardMode,
    /// Gradations: an integer level count or "continuous"
    #[arg(long, default_value = "continuous")]
    pub quant: Quant,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Args)]
pub struct Table1Args {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Args)]
pub struct SurfaceArgs {
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub hi: f64,
    /// Samples per axis (>= 2)
    #[arg(long, default_value_t = 61)]
    pub resolution: u32,
    #[arg(long, default_value = "results/surface.csv")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CheckArgs {
    /// Run a single suite: gradient | pulse | device
    #[arg(long)]
    pub suite: Option<String>,
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Table1(args) => cmd_table1(&args),
        Command::Surface(args) => cmd_surface(&args),
        Command::Check(args) => cmd_check(&args),
    }
}

/// Writes `content` to `path` atomically (temp file + rename).
fn write_atomic(path: &Path, content: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)
}

fn epoch_csv(result: &ExperimentResult) -> String {
    let mut csv = String::from("trial,epoch,lr,train_error,test_error\n");
    for trial in &result.trials {
        for r in &trial.records {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                trial.trial, r.epoch, r.lr, r.train_error, r.test_error
            );
        }
    }
    csv
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    mean_test_error: f64,
    sd_test_error: f64,
    trials: u32,
}

fn write_cell_outputs(out_dir: &Path, result: &ExperimentResult) -> Result<(), Box<dyn Error>> {
    let tag = result.config.cell_tag();
    write_atomic(
        &out_dir.join(format!("{tag}.csv")),
        epoch_csv(result).as_bytes(),
    )?;
    let summary = Summary {
        config: &result.config,
        mean_test_error: result.mean_final_test_error,
        sd_test_error: result.sd_final_test_error,
        trials: result.config.trials,
    };
    let json = serde_json::to_vec_pretty(&summary)?;
    write_atomic(&out_dir.join(format!("{tag}_summary.json")), &json)?;
    Ok(())
}

fn summary_line(result: &ExperimentResult) -> String {
    format!(
        "{}/{}/{}: mean final test error {:.2}% \u{b1} {:.2}% ({} trials)",
        result.config.method,
        result.config.backward,
        result.config.quant,
        100.0 * result.mean_final_test_error,
        100.0 * result.sd_final_test_error,
        result.config.trials
    )
}

pub fn cmd_train(args: &TrainArgs) -> CliResult {
    let config = args.protocol.config(args.method, args.backward, args.quant);
    config.validate()?;
    let (train, test) = args.protocol.load_data()?;
    let result = run_experiment(&config, &train, &test)?;
    write_cell_outputs(&args.protocol.out_dir, &result)?;
    println!("{}", summary_line(&result));
    Ok(())
}

/// Grid cells in reporting order: quantization rows, then
/// (backward, method) columns.
fn grid_cells() -> Vec<(Quant, BackwardMode, UpdateKind)> {
    let mut cells = Vec::with_capacity(12);
    for quant in [Quant::Continuous, Quant::Levels(100), Quant::Levels(20)] {
        for backward in [BackwardMode::Transposed, BackwardMode::Const] {
            for method in [UpdateKind::Times, UpdateKind::Absmin] {
                cells.push((quant, backward, method));
            }
        }
    }
    cells
}

pub fn cmd_table1(args: &Table1Args) -> CliResult {
    let (train, test) = args.protocol.load_data()?;
    let cells = grid_cells();
    let mut results: Vec<ExperimentResult> = Vec::with_capacity(cells.len());
    for (i, (quant, backward, method)) in cells.iter().enumerate() {
        let config = args.protocol.config(*method, *backward, *quant);
        config.validate()?;
        eprintln!("[{}/{}] {} ...", i + 1, cells.len(), config.cell_tag());
        let result = run_experiment(&config, &train, &test)?;
        eprintln!("[{}/{}] {}", i + 1, cells.len(), summary_line(&result));
        write_cell_outputs(&args.protocol.out_dir, &result)?;
        results.push(result);
    }

    let summaries: Vec<serde_json::Value> = results
        .iter()
        .map(|r| {
            serde_json::json!({
                "method": r.config.method,
                "backward": r.config.backward,
                "quant": r.config.quant,
                "mean_test_error": r.mean_final_test_error,
                "sd_test_error": r.sd_final_test_error,
            })
        })
        .collect();
    write_atomic(
        &args.protocol.out_dir.join("table1.json"),
        &serde_json::to_vec_pretty(&summaries)?,
    )?;

    println!("{}", format_grid(&results));
    Ok(())
}

/// Renders the 12 cells as a row-per-quantization table.
fn format_grid(results: &[ExperimentResult]) -> String {
    let cell = |quant: Quant, backward: BackwardMode, method: UpdateKind| -> String {
        results
            .iter()
            .find(|r| {
                r.config.quant == quant
                    && r.config.backward == backward
                    && r.config.method == method
            })
            .map(|r| {
                format!(
                    "{:5.2}% \u{b1} {:4.2}%",
                    100.0 * r.mean_final_test_error,
                    100.0 * r.sd_final_test_error
                )
            })
            .unwrap_or_else(|| "-".to_string())
    };
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:<32} {:<32}", "", "transposed", "const");
    let _ = writeln!(
        out,
        "{:<12} {:<16}{:<16}{:<16}{:<16}",
        "", "times", "absmin", "times", "absmin"
    );
    for (label, quant) in [
        ("continuous", Quant::Continuous),
        ("100 levels", Quant::Levels(100)),
        ("20 levels", Quant::Levels(20)),
    ] {
        let _ = writeln!(
            out,
            "{:<12} {:<16}{:<16}{:<16}{:<16}",
            label,
            cell(quant, BackwardMode::Transposed, UpdateKind::Times),
            cell(quant, BackwardMode::Transposed, UpdateKind::Absmin),
            cell(quant, BackwardMode::Const, UpdateKind::Times),
            cell(quant, BackwardMode::Const, UpdateKind::Absmin),
        );
    }
    out
}

// The negated bound comparison also rejects NaN flags.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn cmd_surface(args: &SurfaceArgs) -> CliResult {
    if !(args.lo < args.hi) {
        return Err(format!("degenerate bounds: lo {} must be < hi {}", args.lo, args.hi).into());
    }
    if args.resolution < 2 {
        return Err(format!("resolution {} must be >= 2", args.resolution).into());
    }
    let n = args.resolution as usize;
    let step = (args.hi - args.lo) / (n as f64 - 1.0);
    let mut csv = String::from("x,y,product,absmin\n");
    for i in 0..n {
        let x = args.lo + i as f64 * step;
        for j in 0..n {
            let y = args.lo + j as f64 * step;
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                x,
                y,
                times_update(x, y),
                absmin_update(x, y)
            );
        }
    }
    write_atomic(&args.out, csv.as_bytes())?;
    println!("{}", args.out.display());
    Ok(())
}

pub fn cmd_check(args: &CheckArgs) -> CliResult {
    let reports: Vec<SuiteReport> = match args.suite.as_deref() {
        None => verify::all_suites(),
        Some("gradient") => vec![verify::gradient_suite()],
        Some("pulse") => vec![verify::pulse_suite()],
        Some("device") => vec![verify::device_suite()],
        Some(other) => {
            return Err(format!(
                "unknown suite '{other}' (expected one of: {})",
                verify::SUITE_NAMES.join(", ")
            )
            .into())
        }
    };
    let mut failed = false;
    for report in &reports {
        let status = if report.passed { "pass" } else { "FAIL" };
        println!("{}: {} ({})", report.name, status, report.detail);
        failed |= !report.passed;
    }
    if failed {
        return Err("one or more check suites failed".into());
    }
    Ok(())
}
