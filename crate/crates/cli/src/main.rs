//! `objforge` command-line driver.
//!
//! Exit codes: 0 on success, 1 when the input or configuration is invalid,
//! 2 when the run itself fails.

mod commands;
mod context;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use context::Context;

#[derive(Debug, Parser)]
#[command(name = "objforge", version, about = "Pre-training objectives, example generators and a desk-scale encoder")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Pipeline configuration (TOML, or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed; every module seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for every written artifact.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Corpus file (text or canonical JSONL); defaults to the bundled toy corpus.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true, env = "OBJFORGE_JOBS")]
    jobs: Option<usize>,

    /// Validate configuration and inputs, then stop without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Corpus ingestion and statistics.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Tokenizer training and encoding.
    #[command(subcommand)]
    Tok(TokCmd),
    /// Token embeddings and clusters for C-RTS.
    #[command(subcommand)]
    Cluster(ClusterCmd),
    /// Write sentence-level examples for one objective as JSONL shards.
    Gen {
        /// ssp, sp, psd, mspp, sdc, dpc, dslc or sds.
        objective: String,
        /// Number of shards the groups are split into.
        #[arg(long, default_value_t = 1)]
        shards: usize,
        /// Groups per shard; by default the groups are split evenly.
        #[arg(long)]
        groups_per_shard: Option<usize>,
    },
    /// Corrupt every corpus sentence for one token-level objective.
    Corrupt {
        /// mlm, rts, crts or slm.
        objective: String,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Cluster map, required for crts.
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Cluster-pair statistics; all zeros when absent.
        #[arg(long)]
        f_matrix: Option<PathBuf>,
    },
    /// Train the encoder on weighted objectives, e.g. `mlm:1.0 ssp:0.5`.
    Train {
        objectives: Vec<String>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Ranking evaluation.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Output-head cost accounting.
    #[command(subcommand)]
    Flops(FlopsCmd),
}

#[derive(Debug, Subcommand)]
enum CorpusCmd {
    /// Segment text files (or merge JSONL corpora) into canonical JSONL.
    Ingest { inputs: Vec<PathBuf> },
    /// Print size statistics as JSON.
    Stats,
}

#[derive(Debug, Subcommand)]
enum TokCmd {
    /// Learn a vocabulary from the corpus.
    Train {
        /// bpe, wordpiece or unigram.
        #[arg(long)]
        kind: Option<String>,
        /// Learned tokens on top of the specials.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Encode text arguments, or stdin lines, as JSON lines.
    Encode {
        #[arg(long)]
        vocab: Option<PathBuf>,
        text: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
enum ClusterCmd {
    /// Train skip-gram token embeddings.
    Embed {
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Partition embeddings with K-means.
    Kmeans {
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Pick the cluster count with the lowest proxy accuracy from a JSON
    /// object such as `{"30": 0.95, "100": 0.92}`.
    Select {
        #[arg(long)]
        scores: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum EvalCmd {
    /// MAP, MRR and P@1 over JSONL groups `{"scores": [...], "relevance": [...]}`.
    Rank {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum FlopsCmd {
    /// Head parameters and per-token FLOPs of the token-level objectives.
    Report {
        #[arg(long)]
        d: Option<u64>,
        #[arg(long)]
        vocab: Option<u64>,
        /// Also report the pairwise/jointwise latency ratio for k candidates.
        #[arg(long)]
        k: Option<u64>,
    },
}

fn run(cli: Cli) -> objforge::Result<()> {
    let mut ctx = Context::new(&cli.global)?;
    match cli.command {
        Command::Corpus(CorpusCmd::Ingest { inputs }) => commands::corpus_ingest(&ctx, &inputs),
        Command::Corpus(CorpusCmd::Stats) => commands::corpus_stats(&ctx),
        Command::Tok(TokCmd::Train { kind, size }) => commands::tok_train(&mut ctx, kind.as_deref(), size),
        Command::Tok(TokCmd::Encode { vocab, text }) => commands::tok_encode(&ctx, vocab, &text),
        Command::Cluster(ClusterCmd::Embed { vocab }) => commands::cluster_embed(&ctx, vocab),
        Command::Cluster(ClusterCmd::Kmeans { embeddings, n, restarts }) => {
            commands::cluster_kmeans(&ctx, embeddings, n, restarts)
        }
        Command::Cluster(ClusterCmd::Select { scores }) => commands::cluster_select(&ctx, &scores),
        Command::Gen { objective, shards, groups_per_shard } => {
            commands::gen(&ctx, &objective, shards, groups_per_shard)
        }
        Command::Corrupt { objective, vocab, clusters, f_matrix } => {
            commands::corrupt(&ctx, &objective, vocab, clusters, f_matrix)
        }
        Command::Train { objectives, steps } => commands::train(&mut ctx, &objectives, steps),
        Command::Eval(EvalCmd::Rank { input }) => commands::eval_rank(&ctx, &input),
        Command::Flops(FlopsCmd::Report { d, vocab, k }) => commands::flops_report(&ctx, d, vocab, k),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
