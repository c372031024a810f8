//! `codegraph`: command-line front end for parsing, graph construction,
//! partitioning, embedding, context transformation and dataset tooling.
//!
//! Exit status is 0 on success, 1 on a domain error (reported as a JSON
//! diagnostic on stderr) and 2 on a usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Config, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "codegraph",
    version,
    about = "Partitioned graph embeddings and knowledge-enriched context for Java methods",
    after_help = "Settings come from command-line flags first, then the config file \
                  (--config, else $CODEGRAPH_CONFIG, else ./codegraph.conf), then built-in defaults."
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Statement-group size threshold for partitioning.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    lambda: Option<u64>,
    /// Embedding width.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(2..))]
    dims: Option<u64>,
    /// Seed for parameter initialization and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model checkpoint; parameters are seeded at random when absent.
    #[arg(long, global = true, value_name = "PATH")]
    params: Option<PathBuf>,
    /// Subword list of `token<TAB>id` lines; needs --merges.
    #[arg(long, global = true, value_name = "PATH")]
    vocab: Option<PathBuf>,
    /// BPE merge list; needs --vocab.
    #[arg(long, global = true, value_name = "PATH")]
    merges: Option<PathBuf>,
    /// API description pairs (`Class.method<TAB>description`).
    #[arg(long, global = true, value_name = "PATH")]
    api: Option<PathBuf>,
    /// Reject malformed lines in the API pair file instead of skipping them.
    #[arg(long, global = true)]
    api_strict: bool,
    /// Text encoder: `reference` or `command:<program> [args...]`.
    #[arg(long, global = true)]
    encoder: Option<String>,
    /// Whitespace-token budget for the enriched context.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    max_tokens: Option<u64>,
    /// Clone decision threshold on the similarity score.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Worker threads for batch subcommands (all cores when absent).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Index of the method to use when a file declares several.
    #[arg(long, global = true, default_value_t = 0)]
    method: usize,
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            lambda: self.lambda.map(|v| v as usize),
            dims: self.dims.map(|v| v as usize),
            seed: self.seed,
            params: self.params.clone(),
            vocab: self.vocab.clone(),
            merges: self.merges.clone(),
            api: self.api.clone(),
            api_strict: self.api_strict.then_some(true),
            encoder: self.encoder.clone(),
            max_tokens: self.max_tokens.map(|v| v as usize),
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitBy {
    Functionality,
    Random,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a Java file and write its AST as JSON.
    Parse {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the subtoken-augmented graph of one method.
    Sast {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a Graphviz rendering.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
    },
    /// Split a method's graph into statement-group subgraphs.
    Partition {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute program and fused embeddings for one or more files.
    Embed {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the knowledge-enriched context of a method.
    Transform {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cut the context to --max-tokens whitespace tokens.
        #[arg(long)]
        truncate: bool,
        /// Write the full structured context as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Build a leakage-free train/val/test pair manifest.
    Split {
        #[arg(long)]
        index: PathBuf,
        /// Functionality (or fragment) counts as `train,val,test`.
        #[arg(long)]
        counts: codegraph_core::dataset::SplitCounts,
        #[arg(long, value_enum, default_value_t = SplitBy::Functionality)]
        by: SplitBy,
        /// Maximum positive pairs per split.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus statistics and a recommended lambda.
    Stats {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Similarity score of two methods.
    CloneScore {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the gradient and permutation-invariance self checks.
    Selfcheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a freshly initialized model checkpoint.
    InitParams {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", commands::diagnostic(&e));
            ExitCode::from(1)
        }
    }
}

/// Returns whether the command's own checks passed.
fn run(cli: Cli) -> anyhow::Result<bool> {
    let file = config::config_path(cli.global.config.as_deref());
    if let Some(f) = &file {
        log::info!("using config file {}", f.display());
    }
    let cfg = Config::resolve(file.as_deref(), cli.global.overrides())?;
    let ctx = commands::Context {
        cfg,
        jobs: cli.global.jobs.map(|j| j as usize),
        method: cli.global.method,
    };
    use Command::*;
    match cli.command {
        Parse { file, out } => commands::parse(&ctx, &file, out.as_deref())?,
        Sast { file, out, dot } => commands::sast(&ctx, &file, out.as_deref(), dot.as_deref())?,
        Partition { file, out } => commands::partition(&ctx, &file, out.as_deref())?,
        Embed { files, out } => commands::embed(&ctx, &files, out.as_deref())?,
        Transform {
            file,
            out,
            truncate,
            json,
        } => commands::transform(&ctx, &file, out.as_deref(), truncate, json)?,
        Split {
            index,
            counts,
            by,
            cap,
            out,
        } => {
            let mode = match by {
                SplitBy::Functionality => codegraph_core::dataset::SplitMode::Functionality,
                SplitBy::Random => codegraph_core::dataset::SplitMode::Random,
            };
            commands::split(&ctx, &index, counts, mode, cap, out.as_deref())?
        }
        Stats { index, out } => commands::stats(&ctx, &index, out.as_deref())?,
        CloneScore { a, b, out } => commands::clone_score(&ctx, &a, &b, out.as_deref())?,
        Selfcheck { out } => return commands::selfcheck(&ctx, out.as_deref()),
        InitParams { out } => commands::init_params(&ctx, &out)?,
    }
    Ok(true)
}
