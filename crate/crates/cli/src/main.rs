use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use verseforge::enhance::EnhanceMode;
use verseforge::pipeline::{ConfigFile, EnhanceOverrides, PredictorKind, RhymeOverrides};
use verseforge::stripping::NoiseKind;
use verseforge::DocumentKind;

mod commands;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "verseforge", version, about = "Content-conditioned rap verse tooling")]
struct Cli {
    /// JSON configuration file; command-line flags override its values.
    #[arg(long, global = true, env = "VERSEFORGE_CONFIG")]
    config: Option<PathBuf>,

    /// Worker threads for batch commands (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Corpus inspection.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Extract content words and apply one noise scheme; one JSON line per document.
    Strip(StripCmd),
    /// Emit (content words, verse) training pairs from a lyrics corpus.
    Pair(PairCmd),
    /// Rhyme density, repetition, overlap and BLEU per verse.
    Analyze(AnalyzeCmd),
    /// Rewrite line endings to lengthen end rhymes.
    Enhance(EnhanceCmd),
    /// Pick the best hypothesis of a generator batch by RD minus repetition.
    Rerank(RerankCmd),
    /// Build a TF-IDF retrieval index over a corpus.
    Index(IndexCmd),
    /// Nearest indexed documents for each query.
    Retrieve(RetrieveCmd),
    /// Strip, select and enhance each input document.
    Pipeline(PipelineCmd),
    /// Mean ± std table over pipeline reports.
    Summary(SummaryCmd),
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Documents, sentences and tokens per document as mean ± std.
    Stats(StatsCmd),
    /// Split lyrics into verses; one JSON line per verse.
    Split(SplitCmd),
}

#[derive(Debug, Args)]
struct StatsCmd {
    /// File or directory of documents.
    input: PathBuf,
    #[arg(long, default_value = "lyrics")]
    kind: DocumentKind,
    /// Keep only documents with at least this many tokens.
    #[arg(long)]
    min_tokens: Option<usize>,
    /// Keep only documents with at most this many tokens.
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Split lyrics into verses first and report per-verse statistics.
    #[arg(long)]
    verses: bool,
    #[arg(long, default_value_t = 4)]
    min_lines: usize,
}

#[derive(Debug, Args)]
struct SplitCmd {
    /// Lyrics file or directory.
    input: PathBuf,
    #[arg(long, default_value_t = 4)]
    min_lines: usize,
}

#[derive(Debug, Args, Default)]
struct NoiseArgs {
    #[arg(long)]
    noise: Option<NoiseKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stopword list, one word per line (default: bundled English list).
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Synonym lexicon, `word<TAB>syn1,syn2`.
    #[arg(long)]
    synonyms: Option<PathBuf>,
    #[arg(long)]
    drop_rate: Option<f64>,
    #[arg(long)]
    synonym_rate: Option<f64>,
}

impl NoiseArgs {
    fn apply(&self, cfg: &mut ConfigFile) {
        cfg.noise = self.noise.or(cfg.noise);
        cfg.seed = self.seed.or(cfg.seed);
        cfg.stopwords_path = self.stopwords.clone().or(cfg.stopwords_path.take());
        cfg.synonyms_path = self.synonyms.clone().or(cfg.synonyms_path.take());
        cfg.drop_rate = self.drop_rate.or(cfg.drop_rate);
        cfg.synonym_rate = self.synonym_rate.or(cfg.synonym_rate);
    }
}

#[derive(Debug, Args, Default)]
struct RhymeArgs {
    /// CMUdict-format pronunciation lexicon.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Rhyme lookback window in words.
    #[arg(long)]
    window: Option<usize>,
    /// Let a word rhyme with an identical earlier word.
    #[arg(long)]
    include_identical: bool,
}

impl RhymeArgs {
    fn apply(&self, cfg: &mut ConfigFile) {
        cfg.lexicon_path = self.lexicon.clone().or(cfg.lexicon_path.take());
        let rhyme = RhymeOverrides {
            window: self.window,
            exclude_identical: self.include_identical.then_some(false),
        };
        *cfg = std::mem::take(cfg).overlay(ConfigFile { rhyme: Some(rhyme), ..Default::default() });
    }
}

#[derive(Debug, Args, Default)]
struct EnhanceArgs {
    #[arg(long)]
    predictor: Option<PredictorKind>,
    /// Base URL of a remote masked-prediction service.
    #[arg(long)]
    endpoint: Option<String>,
    /// Lyrics corpus for the frequency predictor.
    #[arg(long)]
    predictor_corpus: Option<PathBuf>,
    /// Candidates requested per masked position.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    mode: Option<EnhanceMode>,
    /// Words never substituted in, one per line.
    #[arg(long)]
    deny: Option<PathBuf>,
}

impl EnhanceArgs {
    fn apply(&self, cfg: &mut ConfigFile, disable: bool) {
        cfg.predictor = self.predictor.or(cfg.predictor);
        cfg.endpoint = self.endpoint.clone().or(cfg.endpoint.take());
        cfg.predictor_corpus = self.predictor_corpus.clone().or(cfg.predictor_corpus.take());
        cfg.deny_path = self.deny.clone().or(cfg.deny_path.take());
        let enhance = EnhanceOverrides {
            k: self.k,
            mode: self.mode,
            exclude_identical: None,
            enabled: disable.then_some(false),
        };
        *cfg = std::mem::take(cfg).overlay(ConfigFile { enhance: Some(enhance), ..Default::default() });
    }
}

#[derive(Debug, Args)]
struct StripCmd {
    /// File or directory of documents.
    input: PathBuf,
    #[arg(long, default_value = "news")]
    kind: DocumentKind,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
struct PairCmd {
    /// Lyrics file or directory.
    input: PathBuf,
    #[arg(long, default_value_t = 4)]
    min_lines: usize,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
struct AnalyzeCmd {
    /// Verses separated by blank lines.
    input: PathBuf,
    /// Input texts the verses were generated from, aligned by position.
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Reference verses for BLEU, aligned by position.
    #[arg(long)]
    references: Option<PathBuf>,
    #[command(flatten)]
    rhyme: RhymeArgs,
}

#[derive(Debug, Args)]
struct EnhanceCmd {
    /// Verses separated by blank lines.
    input: PathBuf,
    #[command(flatten)]
    rhyme: RhymeArgs,
    #[command(flatten)]
    enhance: EnhanceArgs,
}

#[derive(Debug, Args)]
struct RerankCmd {
    /// JSON lines of `{"rank": int, "text": str}`.
    #[arg(long)]
    hypotheses: PathBuf,
    #[command(flatten)]
    rhyme: RhymeArgs,
}

#[derive(Debug, Args)]
struct IndexCmd {
    /// File or directory of documents.
    input: PathBuf,
    #[arg(long, default_value = "lyrics")]
    kind: DocumentKind,
    /// Output directory.
    #[arg(long)]
    index_dir: PathBuf,
    /// Index individual verses rather than whole songs.
    #[arg(long)]
    verses: bool,
    #[arg(long, default_value_t = 4)]
    min_lines: usize,
    #[arg(long, default_value_t = 1)]
    min_df: usize,
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RetrieveCmd {
    #[arg(long)]
    index_dir: PathBuf,
    /// Queries, one per non-blank line.
    #[arg(long)]
    query: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Rank by averaged word vectors from this file instead of TF-IDF.
    #[arg(long)]
    vectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineCmd {
    /// File or directory of input documents.
    input: PathBuf,
    #[arg(long, default_value = "news")]
    kind: DocumentKind,
    /// Generator hypotheses for a single input document.
    #[arg(long)]
    hypotheses: Option<PathBuf>,
    /// Skip rhyme enhancement.
    #[arg(long)]
    no_enhance: bool,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    rhyme: RhymeArgs,
    #[command(flatten)]
    enhance: EnhanceArgs,
}

#[derive(Debug, Args)]
struct SummaryCmd {
    /// JSON lines written by `pipeline`.
    input: PathBuf,
    /// Row label.
    #[arg(long, default_value = "verseforge")]
    label: String,
    /// Print the summary as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Corpus(CorpusCommand::Stats(c)) => {
            commands::corpus_stats(&c.input, c.kind, c.min_tokens, c.max_tokens, c.verses.then_some(c.min_lines))
        }
        Command::Corpus(CorpusCommand::Split(c)) => commands::corpus_split(&c.input, c.min_lines),
        Command::Strip(c) => {
            c.noise.apply(&mut cfg);
            commands::strip(&c.input, c.kind, cfg.with_defaults())
        }
        Command::Pair(c) => {
            c.noise.apply(&mut cfg);
            commands::pair(&c.input, c.min_lines, cfg.with_defaults())
        }
        Command::Analyze(c) => {
            c.rhyme.apply(&mut cfg);
            commands::analyze(&c.input, c.sources.as_deref(), c.references.as_deref(), cfg.with_defaults())
        }
        Command::Enhance(c) => {
            c.rhyme.apply(&mut cfg);
            c.enhance.apply(&mut cfg, false);
            commands::enhance(&c.input, cfg.with_defaults())
        }
        Command::Rerank(c) => {
            c.rhyme.apply(&mut cfg);
            commands::rerank(&c.hypotheses, cfg.with_defaults())
        }
        Command::Index(c) => {
            cfg.stopwords_path = c.stopwords.or(cfg.stopwords_path);
            let verses = c.verses.then_some(c.min_lines);
            commands::index(&c.input, c.kind, &c.index_dir, verses, c.min_df, cfg.with_defaults())
        }
        Command::Retrieve(c) => commands::retrieve(&c.index_dir, &c.query, c.k, c.vectors.as_deref()),
        Command::Pipeline(c) => {
            c.noise.apply(&mut cfg);
            c.rhyme.apply(&mut cfg);
            c.enhance.apply(&mut cfg, c.no_enhance);
            commands::pipeline(&c.input, c.kind, c.hypotheses.as_deref(), cfg.resolve()?)
        }
        Command::Summary(c) => commands::summary(&c.input, &c.label, c.json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
