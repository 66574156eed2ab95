//! `exel`: one binary for the whole pipeline. Synthesize a benchmark, train
//! a small GNN, export embeddings, estimate subgraph importance, and score
//! the results against fidelity and ground truth.
//!
//! Exit codes: 0 success, 1 verification failure (failed gradient check,
//! diverged training, degenerate ground truth), 2 usage error, 3 I/O or
//! schema error.

mod manifest;
mod pipeline;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use exel_core::explain::LambdaSpec;
use exel_core::gnn::{LayerKind, Readout};
use exel_core::partition::PartitionSource;
use exel_core::Error;
use pipeline::{CliError, PenaltyArg, SelectionSpec, SplitArg};

#[derive(Parser)]
#[command(name = "exel", version, about = "Subgraph importance for pretrained GNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Comma-separated layer widths, e.g. `32,32`.
#[derive(Debug, Clone)]
struct DimList(Vec<usize>);

impl std::str::FromStr for DimList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let dims: Result<Vec<usize>, _> = s.split(',').map(|t| t.trim().parse()).collect();
        match dims {
            Ok(d) if !d.is_empty() && d.iter().all(|&x| x > 0) => Ok(DimList(d)),
            _ => Err(format!(
                "bad dims {s:?}: expected comma-separated positive widths like 32,32"
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic motif-attachment benchmark dataset
    Synth {
        /// Dataset file to write
        #[arg(long)]
        out: PathBuf,
        /// Number of graphs
        #[arg(long)]
        count: usize,
        /// Nodes in the random base graph before the motif attaches
        #[arg(long, default_value_t = 20)]
        base_nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a GNN classifier on a dataset's train split
    Train {
        /// Dataset file
        #[arg(long)]
        data: PathBuf,
        /// Message-passing rule: gcn, gin, or sage
        #[arg(long)]
        arch: LayerKind,
        /// Graph pooling: mean, sum, or max
        #[arg(long, default_value = "mean")]
        readout: Readout,
        /// Layer widths, e.g. 32,32
        #[arg(long, default_value = "32,32")]
        dims: DimList,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model file to write (loss trace lands beside it)
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-graph embedding bundles from a trained model
    Embed {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        /// Dataset file
        #[arg(long)]
        data: PathBuf,
        /// Which graphs: train, test, or all
        #[arg(long, default_value = "all")]
        split: SplitArg,
        /// Directory for <graph_id>.embedding.json files
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Estimate subgraph importance from embedding bundles
    Explain {
        /// Directory of <graph_id>.embedding.json files
        #[arg(long)]
        embeddings: PathBuf,
        /// Dataset file; required by --partition bridges
        #[arg(long)]
        data: Option<PathBuf>,
        /// Node grouping: singleton, bridges, or file:PATH
        #[arg(long, default_value = "bridges")]
        partition: PartitionSource,
        /// group for the structured penalty, lasso for the per-node
        /// ablation (lasso ignores --partition and uses singletons)
        #[arg(long, default_value = "group")]
        penalty: PenaltyArg,
        /// Penalty weight: a number, or auto for 4-fold cross-validation
        #[arg(long, default_value = "auto")]
        lambda: LambdaSpec,
        /// Group-score threshold for selection
        #[arg(long, default_value_t = exel_core::explain::DEFAULT_DELTA)]
        delta: f64,
        /// Directory for <graph_id>.report.json files
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score reports by the F1 drop when selected nodes are masked
    Fidelity {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        /// Dataset file (evaluation runs on its test split)
        #[arg(long)]
        data: PathBuf,
        /// Directory of <graph_id>.report.json files
        #[arg(long)]
        reports: PathBuf,
        /// coverage:FRACTION, topfrac:FRACTION, or threshold
        #[arg(long, default_value = "coverage:0.70")]
        selection: SelectionSpec,
        /// Add a size-matched baseline; only `random` exists
        #[arg(long)]
        baseline: Option<String>,
        /// Seed for the random baseline
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Score each graph separately and average, instead of one
        /// dataset-level F1
        #[arg(long)]
        per_graph_f1: bool,
        /// Metrics file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Score reports against ground-truth importance masks (ROC/PR AUC)
    EvalGt {
        /// Directory of <graph_id>.report.json files
        #[arg(long)]
        reports: PathBuf,
        /// Dataset file carrying gt masks
        #[arg(long)]
        data: PathBuf,
        /// Metrics file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify analytic gradients against finite differences for every
    /// architecture and readout combination
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Finite-difference step
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        /// Max allowed relative error
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
        /// Scale analytic gradients by 1.01 first; the check must then fail
        /// (negative control)
        #[arg(long)]
        inject_bug: bool,
        /// Optional report file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a TU-style flat-file corpus into a dataset file
    ImportTu {
        /// Directory holding <NAME>_A.txt and friends
        #[arg(long)]
        dir: PathBuf,
        /// Corpus name, the <NAME> file prefix
        #[arg(long)]
        name: String,
        /// Dataset file to write
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit code for a library error: verification failures are 1, everything
/// else (I/O, parsing, schema, shape) is 3.
fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::NonFiniteLoss { .. } | Error::DegenerateLabels { .. } => 1,
        _ => 3,
    }
}

/// Applies EXEL_THREADS to the global worker pool. 0 or unset means auto.
fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("EXEL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .map_err(|_| format!("EXEL_THREADS must be a nonnegative integer, got {raw:?}"))?;
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("thread pool setup failed: {e}"))
}

fn run(command: Command) -> pipeline::CmdResult {
    match command {
        Command::Synth {
            out,
            count,
            base_nodes,
            seed,
        } => pipeline::cmd_synth(&out, count, base_nodes, seed),
        Command::Train {
            data,
            arch,
            readout,
            dims,
            epochs,
            lr,
            seed,
            out,
        } => pipeline::cmd_train(&data, arch, readout, &dims.0, epochs, lr, seed, &out),
        Command::Embed {
            model,
            data,
            split,
            out_dir,
        } => pipeline::cmd_embed(&model, &data, split, &out_dir),
        Command::Explain {
            embeddings,
            data,
            partition,
            penalty,
            lambda,
            delta,
            out_dir,
        } => pipeline::cmd_explain(
            &embeddings,
            data.as_deref(),
            &partition,
            penalty,
            lambda,
            delta,
            &out_dir,
        ),
        Command::Fidelity {
            model,
            data,
            reports,
            selection,
            baseline,
            seed,
            per_graph_f1,
            out,
        } => pipeline::cmd_fidelity(
            &model,
            &data,
            &reports,
            selection,
            baseline.as_deref(),
            seed,
            per_graph_f1,
            &out,
        ),
        Command::EvalGt { reports, data, out } => pipeline::cmd_eval_gt(&reports, &data, &out),
        Command::Gradcheck {
            seed,
            step,
            tolerance,
            inject_bug,
            out,
        } => pipeline::cmd_gradcheck(seed, step, tolerance, inject_bug, out.as_deref()),
        Command::ImportTu { dir, name, out } => pipeline::cmd_import_tu(&dir, &name, &out),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        std::process::exit(2);
    }
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    std::process::exit(code);
}
