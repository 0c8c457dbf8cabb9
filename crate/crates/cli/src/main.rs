mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mathemb_core::pipeline::SweepAxis;
use mathemb_core::Method;

/// Symbol and formula embeddings for math-aware page retrieval.
///
/// Settings resolve as command-line flag, then `--config` file, then default.
#[derive(Debug, Parser)]
#[command(name = "mathemb", version, max_term_width = 100)]
pub struct Cli {
    /// TOML file with defaults for any tunable (see --dump-config for the layout)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the resolved configuration as TOML and exit without running
    #[arg(long, global = true)]
    pub dump_config: bool,

    /// Worker threads for training and page encoding; 1 is fully deterministic [default: 1]
    #[arg(long, global = true, value_name = "N", value_parser = parse_workers)]
    pub workers: Option<usize>,

    /// Random seed for initialization, sampling and inference [default: 42]
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Directory with variables.txt, operators.txt, relations.txt, delimiters.txt
    /// and commands.txt replacing the built-in symbol classes
    #[arg(long, global = true, value_name = "DIR")]
    pub tables: Option<PathBuf>,

    /// Stopword list (one word per line) applied to page text and query keywords [default: none]
    #[arg(long, global = true, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,

    /// Log more (-v info, -vv debug); RUST_LOG also works
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Read LaTeX formulae from stdin, one per line; write space-joined tokens per line
    Tokenize,

    /// Read a JSON-lines page collection and write a tokenized collection store
    Ingest {
        /// JSON lines of {page_id, title, text, formulas: [latex]}
        #[arg(long, value_name = "FILE")]
        pages: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },

    /// Keep only formulae with enough variables and operators; writes a formula-only store
    Filter {
        /// Collection store written by `ingest`
        #[arg(long, value_name = "FILE")]
        collection: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        #[command(flatten)]
        rule: FilterArgs,
    },

    /// Train symbol vectors (CBOW with negative sampling)
    TrainSymbol2vec(TrainArgs),

    /// Train formula vectors (PV-DM with negative sampling)
    TrainFormula2vec(TrainArgs),

    /// Nearest symbols by cosine of symbol vectors, as TSV: surface, rank, neighbor, cosine
    Neighbors {
        /// Model directory written by a train command
        #[arg(long, value_name = "DIR")]
        model: PathBuf,
        /// Symbol to look up; repeatable [default: every symbol in the vocabulary]
        #[arg(long = "symbol", value_name = "SURFACE")]
        symbols: Vec<String>,
        /// Neighbors per symbol
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Output file [default: stdout]
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },

    /// Two-dimensional PCA of the symbol vectors, as TSV: surface, x, y
    Pca {
        #[arg(long, value_name = "DIR")]
        model: PathBuf,
        /// Scale every vector to unit length before the projection
        #[arg(long)]
        l2_normalize: bool,
        /// Output file [default: stdout]
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },

    /// Build the text index used by the language-model ranker
    IndexText {
        #[arg(long, value_name = "FILE")]
        collection: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        /// Dirichlet smoothing parameter stored in the index [default: 2000; reference setting: 2000]
        #[arg(long)]
        mu: Option<f64>,
    },

    /// Rank every page for every query and write a TREC run file plus a .meta sidecar
    Search {
        #[arg(long, value_name = "FILE")]
        collection: PathBuf,
        /// JSON lines of {query_id, keywords: [..], formulas: [latex]}
        #[arg(long, value_name = "FILE")]
        queries: PathBuf,
        /// Text index from `index-text` [default: built from the collection]
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
        /// Formula model from `train-formula2vec`; required by formula2vec and combined
        #[arg(long, value_name = "DIR")]
        model: Option<PathBuf>,
        #[command(flatten)]
        ranking: RankingArgs,
        /// Run tag in the last column [default: the method name]
        #[arg(long)]
        tag: Option<String>,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },

    /// Score a run against graded judgments; writes a TSV report
    Evaluate {
        /// TREC run file
        #[arg(long, value_name = "FILE")]
        run: PathBuf,
        /// TREC qrels file: "query_id 0 page_id grade" per line
        #[arg(long, value_name = "FILE")]
        qrels: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
        /// Output file [default: stdout]
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },

    /// Evaluate the pipeline across formula dimensions or combination weights
    Sweep {
        /// Parameter to vary: dim or alpha
        #[arg(long, value_parser = parse_axis)]
        axis: SweepAxis,
        /// Comma-separated values, e.g. 10,50,100 or 0,1,4,1e6
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, value_name = "FILE")]
        collection: PathBuf,
        #[arg(long, value_name = "FILE")]
        queries: PathBuf,
        #[arg(long, value_name = "FILE")]
        qrels: PathBuf,
        /// Training corpus from `filter` [default: the collection filtered with the filter settings]
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Text index [default: built from the collection]
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
        /// Formula model reused by an alpha sweep [default: trained once from the corpus]
        #[arg(long, value_name = "DIR")]
        model: Option<PathBuf>,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        rule: FilterArgs,
        #[command(flatten)]
        ranking: RankingArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Formula store, normally the output of `filter`
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Model directory to create
    #[arg(long, value_name = "DIR")]
    pub output: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    /// Vector dimension [default: 100 for symbols, 300 for formulae; reference setting: 300]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Maximum context width on each side [default: 5]
    #[arg(long)]
    pub window: Option<usize>,
    /// Negative samples per target [default: 5]
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Passes over the corpus [default: 5]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate [default: 0.025]
    #[arg(long)]
    pub lr_start: Option<f64>,
    /// Final learning rate of the linear decay [default: 0.0001]
    #[arg(long)]
    pub lr_end: Option<f64>,
    /// Frequent-symbol subsampling threshold, 0 disables [default: 0]
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Drop symbols seen fewer times than this [default: 1]
    #[arg(long)]
    pub min_count: Option<usize>,
    /// Exponent on counts for the negative-sampling table [default: 0.75]
    #[arg(long)]
    pub sampling_power: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Distinct variables a formula needs [default: 2]
    #[arg(long)]
    pub min_variables: Option<usize>,
    /// Operator and relation occurrences a formula needs [default: 3]
    #[arg(long)]
    pub min_operators: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RankingArgs {
    /// formula2vec, lm or combined [default: combined]
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Weight of the text score in the combination [default: 4; reference setting: 4]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Dirichlet smoothing parameter [default: the index's value, else 2000; reference setting: 2000]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Pages written per query [default: 1000]
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Comma-separated cutoffs for NDCG and precision [default: 30,50]
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub ks: Option<Vec<usize>>,
    /// Lowest grade counted as relevant by P@k, MAP and MRR [default: 1]
    #[arg(long)]
    pub threshold: Option<u32>,
}

fn parse_workers(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err("expected a positive integer".into()),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: mathemb_core::Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: mathemb_core::Error| e.to_string())
}

/// Bad invocation, as opposed to bad data; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mathemb: error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
