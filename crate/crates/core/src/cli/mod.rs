//! The `qrff` command-line harness.
//!
//! ```text
//! qrff run <config>
//! qrff {footprint|scan|krr|mmd|spectral} [--config FILE]
//! common flags: --jobs N  --seed S  --out DIR  --set key=value (repeatable)
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime failure.

pub mod config;
pub mod dataset;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ExperimentConfig, MethodId, Task};
pub use dataset::{load_csv_dataset, CsvDataset};
pub use run::{cell_seeds, csv_path, run, write_csv, ResultRow, CSV_HEADER};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(#[from] crate::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qrff", version, about = "Quantized random Fourier feature experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for experiment cells.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Base seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` assignments applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Bits per sample for each method.
    Footprint(TaskArgs),
    /// Pointwise kernel error on toy pairs.
    Scan(TaskArgs),
    /// Kernel ridge regression test error.
    Krr(TaskArgs),
    /// MMD permutation-test power.
    Mmd(TaskArgs),
    /// Spectral sandwich margins.
    Spectral(TaskArgs),
}

#[derive(Debug, clap::Args)]
struct TaskArgs {
    /// Optional config file; its `task` key is replaced by the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn read_config(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(ConfigError {
            key: "<file>".into(),
            message: format!("{}: {e}", path.display()),
        })
    })
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let (text, task) = match &cli.command {
        Command::Run { config } => (read_config(config)?, None),
        Command::Footprint(a) | Command::Scan(a) | Command::Krr(a) | Command::Mmd(a) | Command::Spectral(a) => {
            let text = a.config.as_ref().map(read_config).transpose()?.unwrap_or_default();
            let task = match cli.command {
                Command::Footprint(_) => Task::Footprint,
                Command::Scan(_) => Task::ApproxScan,
                Command::Krr(_) => Task::Krr,
                Command::Mmd(_) => Task::Mmd,
                _ => Task::Spectral,
            };
            (text, Some(task))
        }
    };
    let mut map = config::parse_assignments(&text)?;
    if let Some(task) = task {
        config::apply_override(&mut map, &format!("task={}", task.name()))?;
    }
    if let Some(seed) = cli.seed {
        config::apply_override(&mut map, &format!("seed={seed}"))?;
    }
    if let Some(out) = &cli.out {
        config::apply_override(&mut map, &format!("output={}", out.display()))?;
    }
    for assignment in &cli.set {
        config::apply_override(&mut map, assignment)?;
    }
    Ok(ExperimentConfig::from_assignments(map)?)
}

fn execute(cli: &Cli) -> Result<(usize, PathBuf), CliError> {
    let config = build_config(cli)?;
    let rows = run(&config, cli.jobs)?;
    let path = write_csv(&rows, &config.output, config.task)?;
    Ok((rows.len(), path))
}

/// Parse arguments, run, and return the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok((rows, path)) => {
            println!("wrote {rows} rows to {}", path.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
