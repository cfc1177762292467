//! The `scribe-forge` command line: one binary, one subcommand per stage.
//!
//! Exit codes: 0 on success, 1 when a stage fails on its data or a remote
//! model, 2 on invalid invocation or configuration. Results go to `--out` or
//! stdout; diagnostics go to stderr.

mod commands;
mod config;
mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::{
    evaluate_runs, EvalOutput, RunRecord, CLASSIFIED_FILE, EXAMPLES_FILE, FAILURES_FILE, GROUPS_FILE, SAMPLED_FILE,
    STATS_FILE, SYNTHETIC_GOLD_FILE,
};
pub use config::{RunConfig, RuntimeConfig, ENV_PREFIX};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Domain(_) | CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn domain(e: impl std::fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "scribe-forge", version, about = "Extraction-script scoring, rewards, sandboxed execution and crawl-group pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration (profiles, runtime, limits, thresholds, dedup, seed, output_dir).
    #[arg(long, global = true, env = "SCRIBE_FORGE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Keep wall-clock timings in outputs (off by default so outputs are reproducible).
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Keep-z deduplication of HTML.
    Dedup(HtmlArgs),
    /// Markup-free text of HTML.
    Flatten(HtmlArgs),
    /// Fuzzy (and optionally LM-judged) P/R/F1 of predicted against gold triples.
    Score(ScoreArgs),
    /// Group rewards from per-page scores or run records.
    Reward(RewardArgs),
    /// All/Example/Holdout report from run records.
    Eval(EvalArgs),
    /// Execute extraction scripts on pages.
    RunScript(RunScriptArgs),
    /// Generate extraction scripts with execution-feedback retries.
    Generate(GenerateArgs),
    /// Build training groups and examples from crawl records.
    Pipeline(PipelineArgs),
    /// Question answering over flattened pages, optionally with triples.
    Qa(QaArgs),
    /// Token ratio and script-reuse speedup.
    Speedup(SpeedupArgs),
}

#[derive(Debug, Args)]
pub struct HtmlArgs {
    /// An HTML file, or a `.jsonl` file of {url, html, title} records.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Same-signature siblings kept per container.
    #[arg(long)]
    pub z: Option<usize>,
    /// Leave text whitespace as it is.
    #[arg(long)]
    pub no_normalize_whitespace: bool,
    /// Add a token count from this counter (e.g. `chars4`).
    #[arg(long)]
    pub counter: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Greedy,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Gold triples, one `["s","p","o"]` per line.
    #[arg(long)]
    pub gold: PathBuf,
    /// Predicted triples, one `["s","p","o"]` per line.
    #[arg(long)]
    pub pred: PathBuf,
    /// Profile name of an LM judge; adds LM P/R/F1.
    #[arg(long)]
    pub judge: Option<String>,
    /// Deadline for greedy matching; implies `--method greedy` when no method is given.
    #[arg(long)]
    pub deadline_secs: Option<f64>,
    /// Matching method.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulaArg {
    Scribes,
    SelfOnly,
}

#[derive(Debug, Args)]
pub struct RewardArgs {
    /// JSONL of {anchor, scores: {page: r}}.
    #[arg(long, conflicts_with = "runs", required_unless_present = "runs")]
    pub scores: Option<PathBuf>,
    /// JSONL run records with gold; scores are computed with optimal matching.
    #[arg(long)]
    pub runs: Option<PathBuf>,
    /// Group mean over all pages, or the anchor's own score only.
    #[arg(long, value_enum, default_value = "scribes")]
    pub formula: FormulaArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    All,
    Example,
    Holdout,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSONL run records {anchor, page, status, triples, gold, ...}.
    #[arg(long)]
    pub runs: PathBuf,
    /// Profile name of an LM judge; adds an LM report.
    #[arg(long)]
    pub judge: Option<String>,
    /// Report only this split.
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Print a fixed-width percentage table instead of JSON.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct RunScriptArgs {
    /// A script file to run on every page of `--pages`.
    #[arg(long, requires = "pages", conflicts_with_all = ["scripts", "examples"])]
    pub script: Option<PathBuf>,
    /// JSONL page records.
    #[arg(long)]
    pub pages: Option<PathBuf>,
    /// JSONL scripts or generate transcripts; matched to examples by anchor URL.
    #[arg(long, requires = "examples", required_unless_present = "script")]
    pub scripts: Option<PathBuf>,
    /// JSONL training examples; each script runs on its example's reward pages.
    #[arg(long)]
    pub examples: Option<PathBuf>,
    /// Interpreter command template with an `{adapter}` placeholder.
    #[arg(long)]
    pub interpreter: Option<String>,
    /// Per-page wall-clock limit.
    #[arg(long)]
    pub wall_timeout_secs: Option<f64>,
    /// Scripts run concurrently.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HintArg {
    None,
    Sample,
    All,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// A single HTML page.
    #[arg(long, conflicts_with = "examples", required_unless_present = "examples")]
    pub page: Option<PathBuf>,
    /// URL recorded for `--page`; defaults to the file path.
    #[arg(long, requires = "page")]
    pub url: Option<String>,
    /// JSONL training examples; a script is generated for each anchor.
    #[arg(long)]
    pub examples: Option<PathBuf>,
    /// Maximum attempts per page.
    #[arg(long, default_value_t = 3)]
    pub iters: usize,
    /// JSONL few-shot demonstrations {html, triples}.
    #[arg(long)]
    pub shots: Option<PathBuf>,
    /// Profile name of the generator model.
    #[arg(long)]
    pub generator: String,
    /// Show the anchor's gold triples to the generator.
    #[arg(long, value_enum, default_value = "none")]
    pub hint: HintArg,
    /// Triples shown with `--hint sample`.
    #[arg(long, default_value_t = 5)]
    pub hint_size: usize,
    /// Show raw instead of deduplicated HTML.
    #[arg(long)]
    pub no_dedup: bool,
    /// Interpreter command template with an `{adapter}` placeholder.
    #[arg(long)]
    pub interpreter: Option<String>,
    /// Per-attempt wall-clock limit.
    #[arg(long)]
    pub wall_timeout_secs: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    All,
    Group,
    Classify,
    Sample,
    Synthesize,
    Failures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupingArg {
    Prefix,
    Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LanguageArg {
    Heuristic,
    Any,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// JSONL page records {url, html, title?, detected_language?, blacklist_flag?}.
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Minimum pages per group.
    #[arg(long)]
    pub n: Option<usize>,
    /// Minimum percentage of semi-structured pages per group.
    #[arg(long)]
    pub m: Option<u32>,
    /// Maximum pages per example, anchor included.
    #[arg(long)]
    pub k: Option<usize>,
    /// Sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Profile name of the page classifier.
    #[arg(long)]
    pub classifier: Option<String>,
    /// Profile name of the direct extractor for synthetic gold.
    #[arg(long)]
    pub extractor: Option<String>,
    /// Stage to run; `all` runs group, classify, sample, synthesize (and failures with `--runs`).
    #[arg(long, value_enum, default_value = "all")]
    pub stage: StageArg,
    /// Blacklist file: domains, and `keyword:<text>` lines.
    #[arg(long)]
    pub blacklist: Option<PathBuf>,
    /// Group by URL prefix or by host only.
    #[arg(long, value_enum, default_value = "prefix")]
    pub grouping: GroupingArg,
    /// English filter: heuristic, or accept any language.
    #[arg(long, value_enum, default_value = "heuristic")]
    pub language: LanguageArg,
    /// Run records used by the failures stage.
    #[arg(long)]
    pub runs: Option<PathBuf>,
    /// Skip stages whose output file already exists.
    #[arg(long)]
    pub resume: bool,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QaModeArg {
    Flatten,
    Predicted,
    Gold,
}

#[derive(Debug, Args)]
pub struct QaArgs {
    /// JSONL {question, gold_answer, page_url}.
    #[arg(long)]
    pub items: PathBuf,
    /// JSONL page records.
    #[arg(long)]
    pub pages: PathBuf,
    /// Reference text: flattened page, plus predicted triples, or plus gold triples.
    #[arg(long, value_enum, default_value = "flatten")]
    pub mode: QaModeArg,
    /// JSONL {url, triples} (run records also work) for the augmented modes.
    #[arg(long)]
    pub triples: Option<PathBuf>,
    /// Profile name of the answering model.
    #[arg(long)]
    pub backbone: String,
    /// Profile name of the answer judge.
    #[arg(long)]
    pub judge: String,
}

#[derive(Debug, Args)]
pub struct SpeedupArgs {
    /// Pages per group that reuse one script.
    #[arg(long)]
    pub k: usize,
    /// Mean tokens per deduplicated page.
    #[arg(long, requires = "flat_tokens", conflicts_with = "pages")]
    pub dedup_tokens: Option<f64>,
    /// Mean tokens per flattened page.
    #[arg(long, requires = "dedup_tokens")]
    pub flat_tokens: Option<f64>,
    /// JSONL page records to measure instead.
    #[arg(long, required_unless_present = "dedup_tokens")]
    pub pages: Option<PathBuf>,
    /// Token counter used with `--pages`.
    #[arg(long, default_value = crate::html::DEFAULT_COUNTER)]
    pub counter: String,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Loads and validates the configuration, then runs the subcommand.
pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env(std::env::vars())?;
    let ctx = commands::Context::new(cfg, &cli.global);
    match cli.command {
        Command::Dedup(a) => commands::dedup(&ctx, a),
        Command::Flatten(a) => commands::flatten(&ctx, a),
        Command::Score(a) => commands::score(&ctx, a),
        Command::Reward(a) => commands::reward(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::RunScript(a) => commands::run_script(ctx, a),
        Command::Generate(a) => commands::generate(ctx, a),
        Command::Pipeline(a) => commands::pipeline(ctx, a),
        Command::Qa(a) => commands::qa(&ctx, a),
        Command::Speedup(a) => commands::speedup(&ctx, a),
    }
}
