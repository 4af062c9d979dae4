use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use odqa_cli::Globals;
use odqa_core::metrics::EvalOptions;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "odqa", version, about = "Open-domain QA with learnable stage prompts")]
struct Cli {
    /// Run configuration (JSON, or TOML by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Drop timing fields from traces so runs can be diffed.
    #[arg(long, global = true)]
    deterministic_compare: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EvalArgs {
    /// Recall cutoffs.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8])]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    bootstrap_rounds: usize,
    /// Count the expansion text as evidence for recall.
    #[arg(long)]
    include_expansion: bool,
}

impl EvalArgs {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            ks: self.ks.clone(),
            bootstrap_rounds: self.bootstrap_rounds,
            include_expansion: self.include_expansion,
            ..EvalOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a BM25 index from a JSON-lines corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer every dataset question, writing one trace per line.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize the prompts over a training set.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Continue from the checkpoint in `out_dir`.
        #[arg(long)]
        resume: bool,
    },
    /// Score traces against gold answers.
    Eval {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Compare sliding-window, retrieval-order and random top-k selection.
    CompareRerank {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[command(flatten)]
        eval: EvalArgs,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let globals = Globals {
        config: cli.config,
        seed: cli.seed,
        workers: cli.workers,
        deterministic_compare: cli.deterministic_compare,
    };
    let result = match &cli.command {
        Command::Index { corpus, out } => odqa_cli::cmd_index(&globals, corpus, out).map(drop),
        Command::Run { dataset, index, prompts, out } => odqa_cli::cmd_run(&globals, dataset, index, prompts, out).map(drop),
        Command::Train { dataset, index, prompts, out_dir, resume } => {
            odqa_cli::cmd_train(&globals, dataset, index, prompts, out_dir, *resume).map(drop)
        }
        Command::Eval { traces, dataset, eval } => odqa_cli::cmd_eval(&globals, traces, dataset, &eval.options()).map(drop),
        Command::CompareRerank { dataset, index, prompts, eval } => {
            odqa_cli::cmd_compare_rerank(&globals, dataset, index, prompts.as_deref(), &eval.options()).map(drop)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
