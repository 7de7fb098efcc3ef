//! `qrisk`: compile risk models to circuits, simulate them and run the
//! sensitivity search from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qrisk_core::compile::{CompileError, ThresholdMode};
use qrisk_core::qae::QaeError;
use qrisk_core::sensitivity::{Rounding, SearchError};
use qrisk_core::sim::SimError;
use qrisk_core::ModelError;

use output::Format;

#[derive(Debug, Parser)]
#[command(name = "qrisk", version, about = "Quantum sensitivity analysis for tree-structured risk models")]
pub struct Cli {
    /// Model file (JSON). Without it the built-in four-item example is used.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Sampled shots; 0 reports exact probabilities only.
    #[arg(long, global = true, default_value_t = 0)]
    pub shots: u64,
    /// Output directory. Tables go to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write gnuplot scripts next to the CSV tables.
    #[arg(long, global = true)]
    pub plot: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ThresholdArg {
    Auto,
    AllItems,
    HighBits,
    Comparator,
}

impl From<ThresholdArg> for ThresholdMode {
    fn from(t: ThresholdArg) -> Self {
        match t {
            ThresholdArg::Auto => ThresholdMode::Auto,
            ThresholdArg::AllItems => ThresholdMode::AllItems,
            ThresholdArg::HighBits => ThresholdMode::HighBits,
            ThresholdArg::Comparator => ThresholdMode::Comparator,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum RoundingArg {
    Floor,
    Nearest,
}

impl From<RoundingArg> for Rounding {
    fn from(r: RoundingArg) -> Self {
        match r {
            RoundingArg::Floor => Rounding::Floor,
            RoundingArg::Nearest => Rounding::Nearest,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ClassicalMode {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum CircuitKind {
    Rm,
    Qrm,
    Qae,
    Oracle,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exceedance probability and loss distribution by brute force or Monte Carlo.
    Classical {
        #[arg(long, value_enum, default_value_t = ClassicalMode::Exact)]
        mode: ClassicalMode,
        #[arg(long, default_value_t = 0)]
        modification: u32,
    },
    /// Amplitude estimation of the exceedance probability.
    Qae {
        #[arg(long, default_value_t = 8)]
        n_ae: usize,
        #[arg(long, default_value_t = 0)]
        modification: u32,
        #[arg(long, value_enum, default_value_t = ThresholdArg::Auto)]
        threshold_mode: ThresholdArg,
    },
    /// Grover search for the modification that reaches a target probability.
    Sensitivity {
        /// Target exceedance probability.
        #[arg(long, conflicts_with = "targets")]
        target_p: Option<f64>,
        /// Explicit output encodings to mark (mirrors are added).
        #[arg(long, value_delimiter = ',')]
        targets: Vec<usize>,
        /// Mark every estimate at or above the target probability.
        #[arg(long, requires = "target_p")]
        at_least: bool,
        /// Also mark this many neighbouring grid cells.
        #[arg(long, default_value_t = 0)]
        widen: usize,
        #[arg(long, default_value_t = 8)]
        n_ae: usize,
        /// Grover steps, or `auto`.
        #[arg(long, default_value = "auto")]
        steps: String,
        #[arg(long, default_value_t = 1.8)]
        factor: f64,
        #[arg(long, value_enum, default_value_t = RoundingArg::Floor)]
        rounding: RoundingArg,
        #[arg(long, value_enum, default_value_t = ThresholdArg::Auto)]
        threshold_mode: ThresholdArg,
    },
    /// Classical versus quantum cost of finding the planted parameter.
    Scaling {
        /// Chain-family sizes (ignored when --models is given).
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 3, 4, 5, 6, 7])]
        sizes: Vec<usize>,
        /// Model files, each with its dominant parameter at --planted.
        #[arg(long, value_delimiter = ',')]
        models: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        planted: u32,
        #[arg(long, default_value_t = 0.7)]
        confidence: f64,
        #[arg(long, default_value_t = 3)]
        n_ae_min: usize,
        #[arg(long, default_value_t = 8)]
        n_ae_max: usize,
    },
    /// Imperfect-oracle experiments.
    Theory {
        #[command(subcommand)]
        which: TheoryCommand,
    },
    /// Qubit and gate estimates.
    Resources {
        #[arg(long)]
        n_r: Option<usize>,
        #[arg(long, default_value_t = 0)]
        n_t: usize,
        #[arg(long, default_value_t = 0)]
        n_c: usize,
        #[arg(long, default_value_t = 0)]
        n_ae: usize,
        /// Defaults to n_r + n_t.
        #[arg(long)]
        n_params: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        factor: f64,
    },
    /// Print a compiled circuit in the text format.
    Circuit {
        #[arg(long, value_enum, default_value_t = CircuitKind::Rm)]
        kind: CircuitKind,
        #[arg(long, default_value_t = 0)]
        n_ae: usize,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<usize>,
        #[arg(long, value_enum, default_value_t = ThresholdArg::Auto)]
        threshold_mode: ThresholdArg,
    },
    /// Rerun the command recorded in a manifest.
    Replay {
        /// Manifest file or the directory holding it.
        manifest: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum TheoryCommand {
    /// Rotated perfect oracle: M̂, Ŝ, P and the simulated peak.
    FalsePositive {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.15, 0.3, 0.45, 0.6, 0.75])]
        alphas: Vec<f64>,
        /// Split each angle evenly over 1..n qubits instead.
        #[arg(long)]
        spread: bool,
    },
    /// Root oracles: ΔP̃/ΔP over a (N, k, a, n) grid.
    Root {
        #[arg(long, value_delimiter = ',', default_values_t = vec![3, 4, 5])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2])]
        k: Vec<usize>,
    },
    /// Root oracle with one rotated ancilla.
    Unequal {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.45, std::f64::consts::FRAC_PI_2])]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        steps: usize,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Budget(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Budget(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Budget(m) | CliError::Io(m) => m,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::EnumerationTooLarge { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Budget { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CompileError> for CliError {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Model(m) => m.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<QaeError> for CliError {
    fn from(e: QaeError) -> Self {
        match e {
            QaeError::Compile(c) => c.into(),
            QaeError::Sim(s) => s.into(),
            QaeError::Model(m) => m.into(),
            QaeError::Budget { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Qae(q) => q.into(),
            SearchError::Model(m) => m.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub fn run(argv: Vec<String>) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let msg = e.to_string();
            return Err(CliError::Usage(msg.strip_prefix("error: ").unwrap_or(&msg).to_string()));
        }
    };
    commands::dispatch(cli, &argv[1..])
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message().trim_end());
            ExitCode::from(e.code())
        }
    }
}
