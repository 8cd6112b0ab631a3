//! `chronicle`: runs the summarization pipeline one stage at a time.
//!
//! Every stage reads and writes line-oriented artifacts in `--out-dir`, so
//! any stage can be rerun on its own once its inputs exist.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod failure;

use failure::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "chronicle",
    version,
    about = "Summarize events that evolve across several news sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize a raw corpus into the corpus artifact.
    Ingest(IngestArgs),
    /// Extract messages from the ingested corpus.
    Extract(ExtractArgs),
    /// Compute synchronic and diachronic relations between messages.
    Relate(RelateArgs),
    /// Classify the event's evolution and export plot data.
    Analyze(AnalyzeArgs),
    /// Render the relation graph as text, with a coverage trace.
    Summarize(SummarizeArgs),
    /// Generate a synthetic raw corpus with a known emission pattern.
    Simulate(SimulateArgs),
    /// Check a domain specification (and optionally templates and a corpus).
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct OutDir {
    /// Directory holding stage artifacts.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct DomainArgs {
    /// Spec file with message, relation and trigger declarations.
    #[arg(long, value_name = "FILE")]
    specs: PathBuf,
    /// Ontology file; defaults to the spec file.
    #[arg(long, value_name = "FILE")]
    ontology: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzerArgs {
    /// Tab-separated `surface<TAB>lemma` list.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Tab-separated `surface<TAB>NE-label` list.
    #[arg(long, value_name = "FILE")]
    gazetteer: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WindowArg {
    /// Synchronic time window, e.g. `1d`, `12h`, `0m`.
    #[arg(long, value_name = "DURATION")]
    window: Option<String>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Raw corpus (jsonl-v1).
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Corpus format.
    #[arg(long, default_value = "jsonl-v1")]
    format: String,
    /// Event identifier; defaults to the corpus file stem.
    #[arg(long)]
    event_id: Option<String>,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Rules,
    Statistical,
    Gold,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Extractor: trigger rules, the trained classifier, or hand-authored messages.
    #[arg(long, value_enum, default_value = "rules")]
    mode: Mode,
    /// Labelled sentences for `--mode statistical`.
    #[arg(long, value_name = "FILE")]
    training: Option<PathBuf>,
    /// Hand-authored messages for `--mode gold`.
    #[arg(long, value_name = "FILE")]
    gold: Option<PathBuf>,
    /// Temporal grammar replacing the built-in patterns.
    #[arg(long, value_name = "FILE")]
    grammar: Option<PathBuf>,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
struct RelateArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    window: WindowArg,
    /// Read hand-authored messages instead of the messages artifact; they are
    /// also written out as the messages artifact.
    #[arg(long, value_name = "FILE")]
    from_gold: Option<PathBuf>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Largest normalized residual still counted as linear.
    #[arg(long, default_value_t = chronicle_core::evolution::DEFAULT_RESIDUAL_THRESHOLD)]
    residual_threshold: f64,
    /// Largest report-time spread still counted as synchronous, e.g. `60m`.
    #[arg(long, value_name = "DURATION", default_value = "60m")]
    emission_tolerance: String,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphFormatArg {
    Json,
    Dot,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Template file.
    #[arg(long, value_name = "FILE")]
    templates: PathBuf,
    #[command(flatten)]
    window: WindowArg,
    /// Most unrelated-message sentences per time bucket.
    #[arg(long)]
    budget: Option<usize>,
    /// Format of the exported relation graph.
    #[arg(long, value_enum, default_value = "json")]
    graph_format: GraphFormatArg,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Linear,
    #[value(alias = "nonlinear", alias = "bursty")]
    NonLinear,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// TOML file with a `[simulate]` table of stream parameters.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Stream kind; overrides the config file.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Random seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sources; overrides the config file.
    #[arg(long)]
    sources: Option<usize>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Template file to check against the domain.
    #[arg(long, value_name = "FILE")]
    templates: Option<PathBuf>,
    /// Raw corpus to check for well-formedness.
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Extract(a) => commands::extract(&a),
        Command::Relate(a) => commands::relate(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Summarize(a) => commands::summarize(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Validate(a) => commands::validate(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CHRONICLE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::FAILURE
        }
    }
}
