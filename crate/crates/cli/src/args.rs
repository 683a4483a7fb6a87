use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kgqa_core::dataset::DatasetFormat;

#[derive(Parser, Debug)]
#[command(name = "kgqa", version, about = "Generalization-level analysis and re-splitting of KGQA benchmarks")]
pub struct Cli {
    /// Knowledge-graph profile: a built-in name (dbpedia, wikidata, freebase)
    /// or a JSON file. Defaults to the input format's usual graph.
    #[arg(long, global = true, value_name = "NAME|FILE")]
    pub profile: Option<String>,

    /// Input dataset format. Inferred from the file contents when omitted.
    #[arg(long, global = true, value_parser = parse_format)]
    pub format: Option<DatasetFormat>,

    /// Download cache directory (default: $KGQA_CACHE_DIR or ~/.cache/kgqa).
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,

    /// Only print errors on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_format(s: &str) -> Result<DatasetFormat, String> {
    s.parse()
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Download benchmark files into the cache.
    Fetch(FetchArgs),
    /// Convert any supported format to generic JSONL.
    Convert(ConvertArgs),
    /// Print the share of each generalization level in a test set.
    Stats(StatsArgs),
    /// Label each test question with its generalization level (JSONL).
    Classify(ClassifyArgs),
    /// Re-split a dataset into train, dev and level-specific test sets.
    Resplit(ResplitArgs),
    /// Check a split manifest for test questions filed under the wrong level.
    Validate(ValidateArgs),
    /// Score predictions per generalization level.
    Evaluate(EvaluateArgs),
    /// Print a built-in knowledge-graph profile as JSON.
    Profile(ProfileArgs),
}

/// `[split=]path`; the split defaults to the records' own, or `unsplit`.
pub type InputSpec = String;

#[derive(Args, Debug)]
pub struct FetchArgs {
    /// Catalog entries to fetch (default: all).
    pub names: Vec<String>,
    /// Catalog JSON replacing the built-in one.
    #[arg(long, value_name = "FILE")]
    pub catalog: Option<PathBuf>,
    /// Also copy every file to DIR/<name>/<split>.json.
    #[arg(long, value_name = "DIR")]
    pub export: Option<PathBuf>,
    /// List catalog entries without downloading.
    #[arg(long)]
    pub list: bool,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    /// Input file as [split=]path; repeatable.
    #[arg(long, short, required = true, value_name = "[SPLIT=]PATH")]
    pub input: Vec<InputSpec>,
    /// Output file (default: stdout).
    #[arg(long, short, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Training file(s) as [split=]path.
    #[arg(long, required = true, value_name = "[SPLIT=]PATH")]
    pub train: Vec<InputSpec>,
    /// Test file(s) as [split=]path.
    #[arg(long, required = true, value_name = "[SPLIT=]PATH")]
    pub test: Vec<InputSpec>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub report_format: ReportFormat,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long, required = true, value_name = "[SPLIT=]PATH")]
    pub train: Vec<InputSpec>,
    #[arg(long, required = true, value_name = "[SPLIT=]PATH")]
    pub test: Vec<InputSpec>,
    /// Output JSONL file (default: stdout).
    #[arg(long, short, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ResplitArgs {
    /// Input file(s) as [split=]path; all are pooled before splitting.
    #[arg(long, short, required = true, value_name = "[SPLIT=]PATH")]
    pub input: Vec<InputSpec>,
    #[arg(long, default_value_t = 0.10)]
    pub r_zero: f64,
    #[arg(long, default_value_t = 0.10)]
    pub r_compo: f64,
    #[arg(long, default_value_t = 0.10)]
    pub r_iid: f64,
    /// Fraction of the remaining train set moved to dev.
    #[arg(long = "dev", default_value_t = 0.10)]
    pub r_dev: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Manifest output (default: stdout).
    #[arg(long, short, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Write one generic JSONL file per split into DIR.
    #[arg(long, value_name = "DIR")]
    pub emit_splits: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long, short, value_name = "FILE")]
    pub manifest: PathBuf,
    /// The full dataset the manifest was built from.
    #[arg(long, short, required = true, value_name = "[SPLIT=]PATH")]
    pub input: Vec<InputSpec>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub report_format: ReportFormat,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Gold dataset file(s) as [split=]path.
    #[arg(long, required = true, value_name = "[SPLIT=]PATH")]
    pub gold: Vec<InputSpec>,
    /// Predictions JSONL: {"question_id", "answers", "ranked"} per line.
    #[arg(long, short, value_name = "FILE")]
    pub predictions: PathBuf,
    /// Take levels from a split manifest's test lists.
    #[arg(long, value_name = "FILE", conflicts_with = "train", required_unless_present = "train")]
    pub manifest: Option<PathBuf>,
    /// Take levels by classifying the gold questions against this train set.
    #[arg(long, value_name = "[SPLIT=]PATH")]
    pub train: Vec<InputSpec>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub report_format: ReportFormat,
    /// Report output (default: stdout).
    #[arg(long, short, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    /// dbpedia, wikidata or freebase.
    pub name: String,
}
