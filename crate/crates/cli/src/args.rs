use std::path::PathBuf;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand};
use toxmoral::baseline::ProviderMode;
use toxmoral::features::FeatureSet;
use toxmoral::models::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "toxmoral", version, about = "Toxicity detection for developer comments")]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Undersample a labeled corpus, optionally splitting off a test set first.
    Sample(SampleArgs),
    /// Write a stratified k-fold assignment.
    Folds(FoldsArgs),
    /// Compute the feature matrix for a corpus.
    Featurize(FeaturizeArgs),
    /// Fit a model on a whole corpus and save it as JSON.
    Train(TrainArgs),
    /// Cross-validate one feature set and model.
    Evaluate(EvaluateArgs),
    /// Per-class mean and standard deviation of every feature.
    Stats(StatsArgs),
    /// Export cross-validated false positives and false negatives.
    Errors(ErrorsArgs),
    /// Fill the response cache with toxicity scores from the scoring API.
    FetchScores(FetchArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output corpus (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Non-toxic documents kept per toxic document.
    #[arg(long, default_value_t = 3)]
    pub ratio: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Drop documents longer than this many characters before sampling.
    #[arg(long)]
    pub max_chars: Option<usize>,
    /// Hold out this many documents per class before undersampling.
    #[arg(long, requires = "test_out")]
    pub test_per_class: Option<usize>,
    #[arg(long, requires = "test_per_class")]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FoldsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ResourceArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_parser = feature_set_parser())]
    pub features: FeatureSet,
    /// word2vec text file (optionally gzipped); needed for moral features.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Directory whose lexicon files replace the bundled ones.
    #[arg(long)]
    pub lexicon_dir: Option<PathBuf>,
    /// Feature-matrix and scoring-API caches live here.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Where baseline scores come from when the corpus lacks them.
    #[arg(long, default_value = "precomputed", value_parser = provider_parser())]
    pub provider: ProviderMode,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_parser = model_parser())]
    pub model: ModelKind,
    /// Hyperparameter override, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Shorthand for --param n_estimators=N.
    #[arg(long)]
    pub n_estimators: Option<usize>,
    /// Shorthand for --param max_iter=N.
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    /// Output CSV: id, feature columns, label.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Metrics over all held-out predictions instead of the mean over folds.
    #[arg(long)]
    pub pooled: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    /// Output CSV: feature, class, mean, sd, n.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ErrorsArgs {
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    /// Output directory for the two JSONL buckets.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub cache_dir: PathBuf,
    /// Also write the corpus with every cached score filled in.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report how many texts need scores without contacting the API.
    #[arg(long)]
    pub dry_run: bool,
}

fn feature_set_parser() -> impl TypedValueParser<Value = FeatureSet> {
    PossibleValuesParser::new(["baseline", "baseline+psych", "baseline+psych+moral"])
        .map(|s| s.parse::<FeatureSet>().expect("listed values parse"))
}

fn model_parser() -> impl TypedValueParser<Value = ModelKind> {
    PossibleValuesParser::new(["svm", "lr", "gb"]).map(|s| s.parse::<ModelKind>().expect("listed values parse"))
}

fn provider_parser() -> impl TypedValueParser<Value = ProviderMode> {
    PossibleValuesParser::new(["precomputed", "cache", "fetch", "heuristic"])
        .map(|s| s.parse::<ProviderMode>().expect("listed values parse"))
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let value: f64 = value.trim().parse().map_err(|_| format!("`{value}` is not a number"))?;
    Ok((name.trim().to_string(), value))
}
