use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineArg {
    Nsga2,
    Nsga3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodingArg {
    Single,
    Double,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Mixed,
    Profits,
    Three,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Unit,
    FanIn,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Write seeded instance files (the standard grid by default).
    Generate(GenerateArgs),
    /// Train the pointer network and write a checkpoint.
    Train(TrainArgs),
    /// Run the hybrid solver on one instance.
    Solve(SolveArgs),
    /// Run a pure permutation-coded MOEA on one instance.
    Baseline(BaselineArgs),
    /// Repeat several solvers over seeds and tabulate HV and time.
    Benchmark(BenchmarkArgs),
    /// Hypervolume of a front CSV.
    Hv(HvArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Train(_) => "train",
            Command::Solve(_) => "solve",
            Command::Baseline(_) => "baseline",
            Command::Benchmark(_) => "benchmark",
            Command::Hv(_) => "hv",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// City counts (comma separated). Defaults to the standard sizes.
    #[arg(long, value_delimiter = ',')]
    pub cities: Vec<usize>,
    /// Profit column counts (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
    pub profits: Vec<usize>,
    /// Length budget; defaults to the standard budget for each size.
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long, default_value_t = moea_drl::instance::TEST_SEED)]
    pub seed_base: u64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Output directory for the checkpoint, log and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Starting settings; the flags below override individual values.
    #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
    pub preset: PresetArg,
    #[arg(long)]
    pub cities: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Training instances per epoch.
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    /// Zero the dynamic features (ablation).
    #[arg(long)]
    pub no_dynamic: bool,
    #[arg(long)]
    pub validation_size: Option<usize>,
    #[arg(long)]
    pub validate_every: Option<usize>,
    /// Training seed.
    #[arg(long)]
    pub seed_base: Option<u64>,
    /// Run on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct RunArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = EngineArg::Nsga2)]
    pub engine: EngineArg,
    #[arg(long, default_value_t = 100)]
    pub pop: usize,
    #[arg(long, default_value_t = 20)]
    pub gens: usize,
    /// Run seed.
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    /// Objective layout; defaults to mixed for one profit column and
    /// three-objective otherwise.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = CodingArg::Single)]
    pub coding: CodingArg,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct BenchmarkArgs {
    /// Instance files (comma separated or repeated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub instance: Vec<PathBuf>,
    /// Solvers: hybrid, hybrid-nsga3, nsga2-500, nsga2-500-double, ...
    #[arg(long, value_delimiter = ',', default_values_t = ["hybrid".to_string(), "nsga2-500".to_string()])]
    pub solvers: Vec<String>,
    /// Needed when a hybrid solver is listed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 11)]
    pub seeds: usize,
    /// Run `i` uses seed `seed_base + i`.
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    #[arg(long, default_value_t = 100)]
    pub pop: usize,
    /// Generations for hybrid solvers (pure solvers carry their own).
    #[arg(long, default_value_t = 20)]
    pub gens: usize,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Repetitions run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct HvArgs {
    /// Front CSV (objective columns, optionally followed by `route`).
    #[arg(long)]
    pub front: PathBuf,
    /// Named reference point: profits, mixed-N or three-N.
    #[arg(long, required_unless_present = "reference")]
    pub ref_preset: Option<String>,
    /// Explicit reference point, comma separated.
    #[arg(long = "ref", value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "ref_preset")]
    pub reference: Option<Vec<f64>>,
    /// Also write the value and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
