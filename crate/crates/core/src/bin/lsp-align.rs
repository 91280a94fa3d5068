use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lspalign::eval::EvalOptions;
use lspalign::lexical::TrainConfig;
use lspalign::pipeline::{self, Method, ResourcePaths};
use lspalign::{Error, ProjectionConfig};

#[derive(Parser)]
#[command(name = "lsp-align", version, about = "Word alignment and entity lexicon mining for parallel corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train translation tables for one method.
    Train(TrainArgs),
    /// Align a bitext, writing one Pharaoh line per sentence.
    Align(AlignArgs),
    /// Project source entity spans onto the target and mine a lexicon.
    Project(ProjectArgs),
    /// Score a mined lexicon against a gold lexicon.
    Eval(EvalArgs),
    /// Generate a synthetic bitext from trained tables.
    Sample(SampleArgs),
    /// Print corpus statistics as JSON.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lexical,
    Semantic,
    Phonetic,
    Lsp,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lexical => Method::Lexical,
            MethodArg::Semantic => Method::Semantic,
            MethodArg::Phonetic => Method::Phonetic,
            MethodArg::Lsp => Method::Lsp,
        }
    }
}

#[derive(Args)]
struct ResourceArgs {
    /// Word vectors in text format (semantic signal).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Source-to-target transliteration rules.
    #[arg(long)]
    translit_src: Option<PathBuf>,
    /// Target-to-source transliteration rules.
    #[arg(long)]
    translit_tgt: Option<PathBuf>,
}

impl From<ResourceArgs> for ResourcePaths {
    fn from(r: ResourceArgs) -> Self {
        ResourcePaths {
            embeddings: r.embeddings,
            translit_src: r.translit_src,
            translit_tgt: r.translit_tgt,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    bitext: PathBuf,
    #[arg(long)]
    model_dir: PathBuf,
    #[command(flatten)]
    resources: ResourceArgs,
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    #[arg(long, default_value_t = 4.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.08)]
    p0: f64,
    /// Number of E-step shards; changes results only by float rounding.
    #[arg(long, default_value_t = 1)]
    shards: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    bitext: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    model_dir: Option<PathBuf>,
    #[command(flatten)]
    resources: ResourceArgs,
    /// Write per-target confidences here (lsp only).
    #[arg(long)]
    confidence: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    smoothing_eps: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    bitext: PathBuf,
    #[arg(long)]
    alignments: PathBuf,
    #[arg(long, conflicts_with = "tags", required_unless_present = "tags")]
    spans: Option<PathBuf>,
    /// BIO tags, one line per bitext sentence.
    #[arg(long)]
    tags: Option<PathBuf>,
    #[arg(long)]
    confidence: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    min_coverage: f64,
    #[arg(long, default_value_t = 10)]
    max_span_len: usize,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    #[arg(long, default_value_t = 0.0)]
    min_score: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    mined: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Span file for source frequency buckets.
    #[arg(long)]
    spans: Option<PathBuf>,
    /// Write the report as JSON here.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    fuzzy_source_join: bool,
    #[arg(long)]
    casefold_eval: bool,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 100)]
    sentences: usize,
    #[arg(long, default_value_t = 3)]
    min_len: usize,
    #[arg(long, default_value_t = 12)]
    max_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    bitext: PathBuf,
    #[arg(long)]
    spans: Option<PathBuf>,
}

fn run(command: Command) -> lspalign::Result<()> {
    match command {
        Command::Train(a) => {
            let manifest = pipeline::train(&pipeline::TrainOptions {
                method: a.method.into(),
                bitext: a.bitext,
                model_dir: a.model_dir,
                resources: a.resources.into(),
                train: TrainConfig {
                    iterations: a.iterations,
                    lambda: a.lambda,
                    p0: a.p0,
                    shards: a.shards,
                },
                threads: a.threads,
            })?;
            println!("{}", serde_json::to_string(&manifest)?);
        }
        Command::Align(a) => {
            let summary = pipeline::align(&pipeline::AlignOptions {
                method: a.method.into(),
                bitext: a.bitext,
                output: a.output,
                model_dir: a.model_dir,
                resources: a.resources.into(),
                confidence: a.confidence,
                smoothing_eps: a.smoothing_eps,
                threads: a.threads,
            })?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Project(a) => {
            let summary = pipeline::project(&pipeline::ProjectOptions {
                bitext: a.bitext,
                alignments: a.alignments,
                spans: a.spans,
                tags: a.tags,
                confidence: a.confidence,
                output: a.output,
                projection: ProjectionConfig {
                    min_coverage: a.min_coverage,
                    max_span_len: a.max_span_len,
                },
                min_count: a.min_count,
                min_score: a.min_score,
                threads: a.threads,
            })?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Eval(a) => {
            let report = pipeline::eval(&pipeline::EvalCommand {
                mined: a.mined,
                gold: a.gold,
                spans: a.spans,
                output: a.output,
                options: EvalOptions {
                    fuzzy_source_join: a.fuzzy_source_join,
                    casefold: a.casefold_eval,
                },
            })?;
            print!("{report}");
        }
        Command::Sample(a) => {
            let n = pipeline::sample(&pipeline::SampleOptions {
                model_dir: a.model_dir,
                output: a.output,
                sentences: a.sentences,
                min_len: a.min_len,
                max_len: a.max_len,
                seed: a.seed,
            })?;
            log::info!("sampled {n} sentences");
        }
        Command::Stats(a) => {
            let stats = pipeline::stats(&a.bitext, a.spans.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LSP_ALIGN_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
