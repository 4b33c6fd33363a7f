use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use soc_dfn::network::LossKind;
use soc_dfn::optimize::OptimizerKind;
use soc_dfn::presets::Preset;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage or configuration error
  3  I/O error (missing or unwritable file)
  4  schema or validation error (bad CSV, corrupt model)
  5  numeric failure (non-finite loss)";

#[derive(Debug, Parser)]
#[command(name = "socdfn", version, about = "State-of-charge regression with deep feedforward networks", after_help = EXIT_CODES)]
pub struct Cli {
    /// Log per-epoch progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a drive cycle and write it as CSV.
    #[command(after_help = EXIT_CODES)]
    GenData(GenDataArgs),
    /// Fit one model on a train/validation split and evaluate on the test split.
    #[command(after_help = EXIT_CODES)]
    Train(TrainArgs),
    /// K-fold cross-validation on the training portion.
    #[command(after_help = EXIT_CODES)]
    Crossval(CrossvalArgs),
    /// Print the MAE of a saved model on a labeled CSV.
    #[command(after_help = EXIT_CODES)]
    Evaluate(EvaluateArgs),
    /// Write SOC predictions for a feature CSV.
    #[command(after_help = EXIT_CODES)]
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Cycle length in seconds.
    #[arg(long, default_value_t = 20_000.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Largest discharge current, amperes.
    #[arg(long, default_value_t = 1.7)]
    pub peak_discharge: f64,
    #[arg(long, default_value_t = 0.1)]
    pub regen_fraction: f64,
    /// Initial SOC in percent.
    #[arg(long, default_value_t = 100.0)]
    pub soc0: f64,
    #[arg(long, default_value_t = 2.9)]
    pub capacity: f64,
    #[arg(long, default_value_t = 0.05)]
    pub r_internal: f64,
    #[arg(long, default_value_t = 25.0)]
    pub ambient: f64,
    /// Voltage sensor noise std, volts.
    #[arg(long, default_value_t = 0.01)]
    pub noise_voltage: f64,
    /// Current sensor noise std, amperes.
    #[arg(long, default_value_t = 0.02)]
    pub noise_current: f64,
    /// Temperature sensor noise std, kelvin.
    #[arg(long, default_value_t = 0.1)]
    pub noise_temp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    #[value(name = "paper-2h")]
    Paper2h,
    #[value(name = "paper-4h-dropout")]
    Paper4hDropout,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Paper2h => Preset::Paper2h,
            PresetArg::Paper4hDropout => Preset::Paper4hDropout,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Rmsprop,
    Adam,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Rmsprop => OptimizerKind::Rmsprop,
            OptimizerArg::Adam => OptimizerKind::Adam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Mse,
    Mae,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Mse => LossKind::Mse,
            LossArg::Mae => LossKind::Mae,
        }
    }
}

/// Architecture and optimization settings. Explicit flags override the preset.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Units per hidden layer [default: 256]
    #[arg(long)]
    pub units: Option<usize>,
    /// Number of dense hidden layers, not counting dropout [default: 2]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Dropout rate after each hidden layer [default: 0]
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub l1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    /// Mini-batch size [default: 128]
    #[arg(long)]
    pub batch: Option<usize>,
    /// [default: 50]
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 0.9)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Training loss; MAE is always the reported metric.
    #[arg(long, value_enum, default_value_t = LossArg::Mse)]
    pub loss: LossArg,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val_frac: f64,
    /// Split in time order instead of shuffling rows first.
    #[arg(long)]
    pub no_shuffle: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled CSV to split into train/validation (and test, unless --test is given).
    #[arg(long)]
    pub data: PathBuf,
    /// Separate labeled test CSV; its rows are only ever evaluated.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub history_out: Option<PathBuf>,
    /// Write the held-out test rows as CSV.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
    /// Write a gnuplot script plotting the learning curves.
    #[arg(long)]
    pub emit_gnuplot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Separate labeled test CSV for the final model; with it, all of --data is cross-validated.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Fraction of --data held out as test before cross-validation.
    #[arg(long, default_value_t = 0.1)]
    pub test_frac: f64,
    #[arg(long)]
    pub no_shuffle: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Parallel fold workers [default: min(k, logical CPUs)]
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Directory for per-fold history CSVs.
    #[arg(long)]
    pub history_dir: Option<PathBuf>,
    /// Retrain on the whole training portion, save here and report test MAE.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub emit_gnuplot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with `t_s,voltage_v,current_a,temp_c` (a trailing soc_pct column is ignored).
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
