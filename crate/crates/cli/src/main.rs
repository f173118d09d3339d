mod commands;
mod spec;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub const DEFAULT_OUT: &str = "wlerg-out";

#[derive(Debug, Parser)]
#[command(name = "wlerg", version, about = "Wavelet latent position random graphs: sampling, fitting, scans and diagnostics")]
pub struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Replay the run recorded in a manifest.json.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Command {
    /// Draw latent positions and a graph from a kernel.
    Sample(SampleArgs),
    /// Fit the wavelet pipeline to an edge list.
    Fit(FitArgs),
    /// Held-out link prediction against histogram and block-model baselines.
    Eval(EvalArgs),
    /// Standardised dyadic block scan.
    Scan(ScanArgs),
    /// Tilt-path diagnostics and limiting log-MGF.
    Tilt(TiltArgs),
    /// Per-scale recovery error over signal multipliers.
    Phase(PhaseArgs),
    /// Haar transform between grid and coefficient CSVs.
    Transform(TransformArgs),
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    /// Kernel: `er:p`, `two-block:pin,pout`, `hier:q0,q1,...` or a JSON file.
    #[arg(long)]
    pub kernel: String,
    #[arg(long)]
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Edge list ("i j" per line).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value = "degree")]
    pub method: String,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value = "degree")]
    pub method: String,
    /// Held-out fraction of dyads.
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub splits: usize,
    /// Blocks of the SBM baseline.
    #[arg(long = "blocks", default_value_t = 8)]
    pub b: usize,
    /// Also run the K x kappa robustness sweep.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub sweep_k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub sweep_kappa: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ScanArgs {
    /// Edge list.
    #[arg(long)]
    pub input: PathBuf,
    /// Latent positions CSV; with `--kernel` runs the scan against a known null.
    #[arg(long, requires = "kernel")]
    pub positions: Option<PathBuf>,
    #[arg(long, requires = "positions")]
    pub kernel: Option<String>,
    /// Directory holding fit.json and surface.csv; otherwise the fit is computed here.
    #[arg(long, conflicts_with = "positions")]
    pub fit: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value = "degree")]
    pub method: String,
    /// Scale range `a..b`.
    #[arg(long)]
    pub scales: Option<String>,
    #[arg(long, default_value_t = wlerg_core::detection::SCAN_C1)]
    pub c1: f64,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct TiltArgs {
    #[arg(long)]
    pub kernel: String,
    /// Edge-count coordinate of the tilt direction.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub lambda0: f64,
    /// Detail coordinate `j1:l1:j2:l2=v` (j = -1 for the constant); repeatable.
    #[arg(long = "coef", allow_hyphen_values = true)]
    pub coefs: Vec<String>,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub t_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub t_max: f64,
    #[arg(long, default_value_t = 9)]
    pub steps: usize,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub reps: usize,
    /// Quadrature grid for the log-MGF.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct PhaseArgs {
    /// Separation probabilities `q0,...,qJ` of the hierarchical family.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.45,0.5,0.51")]
    pub q: Vec<f64>,
    /// Factors applied to the detail coefficients.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
    pub multipliers: Vec<f64>,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Grid CSV `row,col,value` to coefficient CSV.
    Forward,
    /// Coefficient CSV to grid CSV.
    Inverse,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct TransformArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub direction: Direction,
}

/// Resolved configuration, written to `manifest.json` by every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub command: Command,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Internal(String),
}

impl From<wlerg_core::Error> for CliError {
    fn from(e: wlerg_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

pub fn write_output(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn resolve(cli: Cli) -> CliResult<Manifest> {
    match cli.manifest {
        Some(path) => {
            if cli.command.is_some() {
                return Err(CliError::Validation("--manifest replaces the subcommand; give one or the other".into()));
            }
            let mut m: Manifest = serde_json::from_str(&read_input(&path)?)
                .map_err(|e| CliError::Validation(format!("bad manifest {}: {e}", path.display())))?;
            if let Some(out) = cli.out {
                m.out = out;
            }
            if cli.threads.is_some() {
                m.threads = cli.threads;
            }
            if cli.seed.is_some_and(|s| s != m.seed) {
                return Err(CliError::Validation("--seed conflicts with the manifest".into()));
            }
            Ok(m)
        }
        None => {
            let command = cli.command.ok_or_else(|| CliError::Validation("no subcommand given (see --help)".into()))?;
            Ok(Manifest {
                tool: "wlerg".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed: cli.seed.unwrap_or(0),
                threads: cli.threads,
                out: cli.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
                command,
            })
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let m = resolve(cli)?;
    if let Some(t) = m.threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    std::fs::create_dir_all(&m.out)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", m.out.display())))?;
    let manifest = serde_json::to_string_pretty(&m).map_err(|e| CliError::Internal(e.to_string()))?;
    write_output(&m.out, "manifest.json", &(manifest + "\n"))?;
    commands::dispatch(&m)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
