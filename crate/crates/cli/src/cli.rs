//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "modpair", version, about = "Synthetic module-program QA: data, pairing, training, evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (`OUT` plus its `.split.json` manifest).
    GenData(GenDataArgs),
    /// Link equivalent `find` subtrees among a dataset's own questions.
    FindPairs(FindPairsArgs),
    /// Construct template probes; writes the extended dataset and its links.
    MakePairs(MakePairsArgs),
    /// Generate rule-based number/date probes; writes the extended dataset and its links.
    GenProbes(GenProbesArgs),
    /// Train a model; writes checkpoint.json, metrics.jsonl and run.json.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Build a compositional-generalization split of a dataset's questions.
    CompSplit(CompSplitArgs),
    /// Per-seed deltas between two sets of evaluation reports.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,
    /// key = value file with generator keys (optional).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Number of passages.
    #[arg(long, value_name = "USIZE", default_value_t = 300)]
    pub n: usize,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FindPairsArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Equivalence threshold on the argument matching score.
    #[arg(long, value_name = "F64", default_value_t = modpair_core::pairing::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakePairsArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Comma list of template families.
    #[arg(long, value_name = "LIST", default_value = "count,max,min,date")]
    pub templates: String,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Dataset with the constructed probes appended.
    #[arg(long, value_name = "PATH")]
    pub out_data: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenProbesArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,
    /// Number/date positions sampled per passage.
    #[arg(long, value_name = "USIZE", default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_name = "F64", default_value_t = modpair_core::pairing::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Dataset with the generated probes appended.
    #[arg(long, value_name = "PATH")]
    pub out_data: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Pair file; repeat for several sources.
    #[arg(long, value_name = "PATH")]
    pub pairs: Vec<PathBuf>,
    /// key = value file with model and training keys (optional).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config's `seed` (optional).
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Train and select on a compositional split instead of the passage split (optional).
    #[arg(long, value_name = "PATH")]
    pub comp_split: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// train, dev or test; with --comp-split also held-out.
    #[arg(long, value_name = "NAME", default_value = "test")]
    pub split: String,
    /// Compositional split whose question ids define the split (optional).
    #[arg(long, value_name = "PATH")]
    pub comp_split: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompSplitArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// complex-arithmetic or filter-argmax.
    #[arg(long, value_name = "NAME")]
    pub spec: String,
    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,
    /// Fraction of passages whose remaining questions form the dev set.
    #[arg(long, value_name = "F64", default_value_t = 0.1)]
    pub dev_fraction: f64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline evaluation reports, one per seed.
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    pub baseline: Vec<PathBuf>,
    /// Treatment evaluation reports, in the same seed order.
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    /// Comma list of seed labels (default 0, 1, ...).
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}
