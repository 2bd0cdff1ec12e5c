//! `asrbench` — command-line front end for the transcript benchmarking
//! library. Wires the pipeline end to end: corpus prep → transcription →
//! scoring → disfluency analysis → grouped reports.
//!
//! Exit codes: 0 when every record succeeded, 1 when the run finished but
//! some records failed, 2 for configuration or environment errors.

mod settings;
mod tasks;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use settings::{EvaluateSettings, FilterCorpusSettings, ReportSettings, TranscribeSettings};

#[derive(Parser)]
#[command(
    name = "asrbench",
    version,
    about = "Benchmark speech-recognition transcripts: corpus prep, transcription, scoring, reports"
)]
struct Cli {
    /// Optional TOML config file; explicit flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter candidate sentences by wordlist and draw a seeded sample.
    FilterCorpus(FilterCorpusArgs),
    /// Transcribe a recording manifest through vendor APIs (or the replay
    /// cache) and write evaluation records.
    Transcribe(TranscribeArgs),
    /// Score transcripts (from a manifest, a records file, or a directory of
    /// reference/hypothesis pairs) and write a grouped report.
    Evaluate(EvaluateArgs),
    /// Regroup an existing records file into report tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct FilterCorpusArgs {
    /// Candidate prompt file, one sentence per line.
    #[arg(long, value_name = "FILE")]
    prompts: Option<PathBuf>,
    /// Wordlist file; a sentence survives only if every token is listed.
    #[arg(long, value_name = "FILE")]
    wordlist: Option<PathBuf>,
    /// Number of sentences to draw from the filtered set.
    #[arg(short = 'k', long, value_name = "N")]
    count: Option<usize>,
    /// RNG seed; identical seeds reproduce identical samples.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Output file, one sampled sentence per line.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Flags mirroring the text-normalization settings; shared by every command
/// that scores transcripts.
#[derive(Args, Clone)]
struct NormalizationArgs {
    /// Keep digit tokens verbatim (the default; conflicts with --digit-map).
    #[arg(long, conflicts_with = "digit_map")]
    keep_digits: bool,
    /// JSON file mapping digit tokens to words, e.g. {"1": "one"}.
    #[arg(long, value_name = "FILE")]
    digit_map: Option<PathBuf>,
    /// Comma-separated filler tokens (default: um,uh).
    #[arg(long, value_name = "LIST")]
    filler_tokens: Option<String>,
    /// Keep angle-bracket vendor tags such as <silence>.
    #[arg(long)]
    keep_vendor_tags: bool,
    /// Keep leading "speaker N HH:MM:SS" stamps.
    #[arg(long)]
    keep_speaker_stamps: bool,
}

#[derive(Args)]
struct TranscribeArgs {
    /// Recording manifest (JSON).
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Backend to query; may be given multiple times.
    #[arg(long = "backend", value_name = "NAME")]
    backends: Vec<String>,
    /// Disfluency condition; may be given multiple times (default: both).
    #[arg(long = "condition", value_name = "omitted|retained")]
    conditions: Vec<String>,
    /// Response cache root.
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Output records file (JSON lines).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Directory of per-recording revision annotations (<recording_id>.json).
    #[arg(long, value_name = "DIR")]
    annotations: Option<PathBuf>,
    /// Maximum in-flight requests per backend.
    #[arg(long, value_name = "N")]
    max_concurrency: Option<usize>,
    /// Serve every request from the cache instead of calling vendors.
    #[arg(long)]
    replay: bool,
    /// Context prompt for whisper in the retained condition.
    #[arg(long, value_name = "TEXT")]
    initial_prompt: Option<String>,
    #[command(flatten)]
    normalization: NormalizationArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Recording manifest (JSON); transcribes via cache/API, then reports.
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Existing records file to regroup instead of transcribing.
    #[arg(long, value_name = "FILE")]
    records: Option<PathBuf>,
    /// Directory of <id>.ref.txt / <id>.hyp.txt transcript pairs.
    #[arg(long, value_name = "DIR")]
    pairs: Option<PathBuf>,
    /// Backend to query; may be given multiple times.
    #[arg(long = "backend", value_name = "NAME")]
    backends: Vec<String>,
    /// Disfluency condition; repeatable. Manifest mode defaults to both,
    /// pairs mode to retained.
    #[arg(long = "condition", value_name = "omitted|retained")]
    conditions: Vec<String>,
    /// Response cache root.
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Report output file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the per-recording records here (JSON lines).
    #[arg(long, value_name = "FILE")]
    out_records: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long, value_name = "FORMAT")]
    format: Option<String>,
    /// Directory of per-recording revision annotations (<recording_id>.json).
    #[arg(long, value_name = "DIR")]
    annotations: Option<PathBuf>,
    /// Maximum in-flight requests per backend.
    #[arg(long, value_name = "N")]
    max_concurrency: Option<usize>,
    /// Serve every request from the cache instead of calling vendors.
    #[arg(long)]
    replay: bool,
    /// Context prompt for whisper in the retained condition.
    #[arg(long, value_name = "TEXT")]
    initial_prompt: Option<String>,
    #[command(flatten)]
    normalization: NormalizationArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Records file to regroup (JSON lines).
    #[arg(long, value_name = "FILE")]
    records: Option<PathBuf>,
    /// Report output file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long, value_name = "FORMAT")]
    format: Option<String>,
    /// Grouping, as comma-separated fields (system, condition, l1, gender,
    /// speaker, speech_type); may be given multiple times.
    #[arg(long = "group-by", value_name = "FIELDS")]
    group_by: Vec<String>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let outcome = run(cli);
    let code = match outcome {
        Ok(0) => 0,
        Ok(failures) => {
            eprintln!("{failures} record(s) failed");
            1
        }
        Err(error) => {
            eprintln!("error: {error:#}");
            2
        }
    };
    std::process::exit(code);
}

/// Dispatches a parsed invocation; returns the number of per-record
/// failures. Configuration problems surface as errors (exit code 2).
fn run(cli: Cli) -> anyhow::Result<usize> {
    let file = settings::load_file_config(cli.config.as_deref())?;
    match cli.command {
        Command::FilterCorpus(args) => {
            tasks::filter_corpus(&FilterCorpusSettings::resolve(args, &file)?)
        }
        Command::Transcribe(args) => tasks::transcribe(&TranscribeSettings::resolve(args, &file)?),
        Command::Evaluate(args) => tasks::evaluate(&EvaluateSettings::resolve(args, &file)?),
        Command::Report(args) => tasks::report(&ReportSettings::resolve(args, &file)?),
    }
}
