//! `pbench` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{
    histogram_rows, read_estimates, read_records, read_t1, records_header, series_rows, summarize_estimates,
    write_estimates, write_histograms, write_records, write_series, write_summary, write_t1, EstimatesRow, Header,
};
use crate::protocol::run_cycles;
use crate::timeseries::{window_series, DEFAULT_BINS};

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "PBENCH_WORKERS";

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_INSUFFICIENT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "pbench", version, about = "Single-qubit purity benchmarking simulator and estimator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate measurement records for a run configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit moving-window error budgets to measurement records.
    Analyze {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn estimates (and optionally a T1 grid) into plot-ready tables.
    Report {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        t1: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
    },
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::InsufficientData(_) => EXIT_INSUFFICIENT,
        _ => EXIT_RUNTIME,
    }
}

fn output_dir(out: Option<PathBuf>, config: &RunConfig) -> Result<PathBuf> {
    out.or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))
}

fn warn_malformed(path: &Path, malformed: &[(u64, String)]) {
    for (line, msg) in malformed {
        eprintln!("warning: {}: line {line}: {msg}", path.display());
    }
}

pub fn simulate(config_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let dir = output_dir(out, &config)?;
    let run = run_cycles(&config.plan, &config.scenario, config.seed)?;
    let hash = config.hash();
    write_records(&dir.join("records.csv"), &records_header(&hash, config.seed), &run.records)?;
    if config.plan.t1_scan.is_some() {
        let header = Header::new("t1_grid").with("config_hash", &hash).with("seed", config.seed);
        write_t1(&dir.join("t1_grid.csv"), &header, &run.t1)?;
    }
    eprintln!("wrote {} records to {}", run.records.len(), dir.display());
    Ok(())
}

pub fn analyze(records_path: &Path, config_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let dir = output_dir(out, &config)?;
    let file = read_records(records_path)?;
    warn_malformed(records_path, &file.malformed);
    let analysis = &config.analysis;
    let (series, rejected) = window_series(&file.rows, &analysis.window, &analysis.estimator, config.seed)?;
    for e in &rejected {
        eprintln!("warning: skipped {e}");
    }
    let rows: Vec<EstimatesRow> = series.iter().map(EstimatesRow::from).collect();
    let hash = config.hash();
    let header = Header::new("estimates").with("config_hash", &hash).with("seed", config.seed);
    write_estimates(&dir.join("estimates.csv"), &header, &rows)?;
    write_summary(&dir.join("summary.json"), &summarize_estimates(&rows, Some(&hash)))?;
    let header = Header::new("histograms").with("config_hash", &hash);
    write_histograms(&dir.join("histograms.csv"), &header, &histogram_rows(&rows, analysis.histogram_bins))?;
    let failed = rows.iter().filter(|r| r.values().is_none()).count();
    eprintln!("fitted {} windows ({failed} failed) into {}", rows.len(), dir.display());
    Ok(())
}

pub fn report(estimates: &Path, t1: Option<&Path>, out: &Path, bins: usize) -> Result<()> {
    if bins == 0 {
        return Err(Error::Config("--bins must be positive".into()));
    }
    let file = read_estimates(estimates)?;
    warn_malformed(estimates, &file.malformed);
    let rows = file.rows;
    write_series(&out.join("series.csv"), &Header::new("series"), &series_rows(&rows))?;
    write_histograms(&out.join("histograms.csv"), &Header::new("histograms"), &histogram_rows(&rows, bins))?;
    write_summary(&out.join("summary.json"), &summarize_estimates(&rows, file.header.get("config_hash")))?;
    if let Some(t1) = t1 {
        let grid = read_t1(t1)?;
        warn_malformed(t1, &grid.malformed);
        let bytes = crate::io::csv_bytes(&Header::new("t1_grid"), &crate::io::T1_COLUMNS, &grid.rows)?;
        crate::io::write_atomic(&out.join("t1_grid.csv"), &bytes)?;
    }
    Ok(())
}

fn configure_workers() -> Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn run(cli: Cli) -> Result<()> {
    configure_workers()?;
    match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Analyze { records, config, out } => analyze(&records, &config, out),
        Command::Report { estimates, t1, out, bins } => report(&estimates, t1.as_deref(), &out, bins),
    }
}

pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
