//! Command-line front-end for itemset summarization.
//!
//! Subcommands: `mine` finds a summary, `estimate` queries a saved model,
//! `score` evaluates a fixed summary, `generate` produces synthetic data,
//! `significance` tests a summary against null models on held-out rows.
//!
//! Exit codes: 0 success, 2 usage, 3 parse error, 4 invalid input,
//! 5 capacity exceeded, 6 no convergence, 7 io error, 10 success with a
//! truncated result (time budget expired).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use itemsum_core::{BackgroundMode, Criterion, Error, FitConfig};

#[derive(Parser)]
#[command(name = "itemsum", version, about = "Succinct itemset summaries of binary transaction data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Mine a succinct itemset summary from a transaction database.
    Mine(MineArgs),
    /// Query itemset probabilities under a model saved by `mine`.
    Estimate(EstimateArgs),
    /// Fit and score a fixed summary against a database.
    Score(ScoreArgs),
    /// Generate a synthetic transaction database.
    Generate(GenerateArgs),
    /// Test a summary's itemsets against null models on held-out rows.
    Significance(SignificanceArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Bic,
    Mdl,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Criterion {
        match c {
            CriterionArg::Bic => Criterion::Bic,
            CriterionArg::Mdl => Criterion::Mdl,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackgroundArg {
    /// No background constraints.
    None,
    /// Column margins (per-item frequencies).
    Cols,
    /// Row-size histogram.
    Rows,
    /// Both column margins and the row-size histogram.
    Both,
}

impl From<BackgroundArg> for BackgroundMode {
    fn from(b: BackgroundArg) -> BackgroundMode {
        match b {
            BackgroundArg::None => BackgroundMode::None,
            BackgroundArg::Cols => BackgroundMode::Columns,
            BackgroundArg::Rows => BackgroundMode::Rows,
            BackgroundArg::Both => BackgroundMode::ColumnsAndRows,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

/// Input database file plus parsing options.
#[derive(Args)]
pub struct InputArgs {
    /// Transaction database: one whitespace-separated transaction per line.
    pub input: PathBuf,
    /// Treat blank lines as empty transactions instead of skipping them.
    #[arg(long)]
    pub keep_blank_rows: bool,
}

/// Model-fitting knobs shared by every subcommand that fits.
#[derive(Args)]
pub struct FitArgs {
    /// Smoothing strength pulling constraint targets toward uniform.
    #[arg(long, env = "ITEMSUM_EPSILON", default_value_t = 0.01)]
    pub epsilon: f64,
    /// Convergence threshold on the worst constraint residual.
    #[arg(long, env = "ITEMSUM_TOL", default_value_t = 1e-6)]
    pub tol: f64,
    /// Iterative-scaling pass budget.
    #[arg(long, alias = "max-passes", env = "ITEMSUM_MAX_ITERS", default_value_t = 1000)]
    pub max_iters: usize,
    /// Cap on distinct items per dependent group of the model.
    #[arg(long, env = "ITEMSUM_MAX_GROUP_ITEMS", default_value_t = 10)]
    pub max_group_items: usize,
}

impl FitArgs {
    pub fn to_config(&self) -> FitConfig {
        FitConfig {
            epsilon: self.epsilon,
            tolerance: self.tol,
            max_passes: self.max_iters,
            max_group_items: self.max_group_items,
            ..FitConfig::default()
        }
    }
}

/// Report destination and format.
#[derive(Args)]
pub struct OutputArgs {
    /// Report format.
    #[arg(long, value_enum, env = "ITEMSUM_FORMAT", default_value_t = Format::Tsv)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct MineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Scoring criterion.
    #[arg(long, value_enum, env = "ITEMSUM_CRITERION", default_value_t = CriterionArg::Mdl)]
    pub criterion: CriterionArg,
    /// Background constraints fitted alongside the summary.
    #[arg(long, value_enum, env = "ITEMSUM_BACKGROUND", default_value_t = BackgroundArg::Cols)]
    pub background: BackgroundArg,
    /// Mine exactly k itemsets and report the full score trajectory;
    /// without it mining stops when the score stops improving.
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Minimum absolute support of a candidate itemset.
    #[arg(long, default_value_t = 1, conflicts_with = "minsup_frac")]
    pub minsup: usize,
    /// Minimum support as a fraction of the row count.
    #[arg(long)]
    pub minsup_frac: Option<f64>,
    /// Largest candidate itemset size.
    #[arg(long, alias = "max-size")]
    pub max_itemset_size: Option<usize>,
    /// Wall-clock budget in seconds; when it expires the partial summary is
    /// written, flagged as truncated, and the exit code is 10.
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Worker threads for the candidate search.
    #[arg(long, env = "ITEMSUM_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Save the fitted model for later `estimate` runs.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Save the mined itemsets, one per line, for `score` or `significance`.
    #[arg(long)]
    pub itemsets_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Query itemsets: one whitespace-separated itemset per line.
    pub queries: PathBuf,
    /// Model file saved by `mine --model-out`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Summary itemsets, one per line; frequencies are taken from the data.
    #[arg(long)]
    pub itemsets: PathBuf,
    /// Scoring criterion.
    #[arg(long, value_enum, env = "ITEMSUM_CRITERION", default_value_t = CriterionArg::Mdl)]
    pub criterion: CriterionArg,
    /// Background constraints fitted alongside the summary.
    #[arg(long, value_enum, env = "ITEMSUM_BACKGROUND", default_value_t = BackgroundArg::Cols)]
    pub background: BackgroundArg,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[command(subcommand)]
    pub kind: GenerateKind,
    /// Write the database here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Metadata sidecar path (default: `<output>.meta.json`).
    #[arg(long, global = true)]
    pub meta: Option<PathBuf>,
    /// Generator seed; the same seed reproduces the file byte for byte.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand)]
pub enum GenerateKind {
    /// Independent items with frequencies drawn uniformly from a band.
    Independent {
        #[arg(long, default_value_t = 20)]
        items: usize,
        #[arg(long, default_value_t = 20_000)]
        rows: usize,
        #[arg(long, default_value_t = 0.2)]
        freq_lo: f64,
        #[arg(long, default_value_t = 0.8)]
        freq_hi: f64,
    },
    /// A chain where each item is a noisy copy of its predecessor.
    Markov {
        #[arg(long, default_value_t = 20)]
        items: usize,
        #[arg(long, default_value_t = 20_000)]
        rows: usize,
        #[arg(long, default_value_t = 0.5)]
        copy_lo: f64,
        #[arg(long, default_value_t = 0.8)]
        copy_hi: f64,
        #[arg(long, default_value_t = 0.5)]
        init_prob: f64,
    },
    /// Planted itemsets firing independently over background noise.
    Mosaic {
        #[arg(long, default_value_t = 30)]
        items: usize,
        #[arg(long, default_value_t = 20_000)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        sets: usize,
        #[arg(long, default_value_t = 5)]
        set_size: usize,
        #[arg(long, default_value_t = 0.2)]
        freq_lo: f64,
        #[arg(long, default_value_t = 0.5)]
        freq_hi: f64,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NullArg {
    /// Report all three null models.
    All,
    /// Background constraints only.
    Background,
    /// Background plus the itemsets preceding each tested one.
    Preceding,
    /// The full summary, applied to sampled unselected candidates.
    Full,
}

#[derive(Args)]
pub struct SignificanceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Summary itemsets to test, one per line.
    #[arg(long)]
    pub itemsets: PathBuf,
    /// Held-out rows; omitted = split the input in half by --split-seed.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    /// Seed of the exploratory/holdout split when --holdout is absent.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Familywise error rate; Bonferroni-corrected per section.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Which null models to report.
    #[arg(long, value_enum, default_value_t = NullArg::All)]
    pub null: NullArg,
    /// Unselected candidates sampled for the full-summary section.
    #[arg(long, default_value_t = 1000)]
    pub sample_size: usize,
    /// Candidate-sampling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minimum exploratory support of sampled candidates.
    #[arg(long, default_value_t = 1)]
    pub minsup: usize,
    /// Largest sampled candidate size.
    #[arg(long)]
    pub max_itemset_size: Option<usize>,
    /// Cap on candidates enumerated while sampling.
    #[arg(long, default_value_t = 1_000_000)]
    pub enumeration_limit: usize,
    /// Background constraints of every null model.
    #[arg(long, value_enum, env = "ITEMSUM_BACKGROUND", default_value_t = BackgroundArg::Cols)]
    pub background: BackgroundArg,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } => 3,
        Error::InvalidInput(_) => 4,
        Error::Capacity(_) => 5,
        Error::NoConvergence { .. } => 6,
        Error::Io(_) => 7,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
