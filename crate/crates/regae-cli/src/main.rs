//! Command-line entry points binding the autoencoder into reproducible runs.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric abort.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use regae_core::checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
use regae_core::codec::{decode, embed, read_embedding, write_embedding, CodecError};
use regae_core::config::{preset, ConfigError, RunConfig, PRESET_NAMES};
use regae_core::dataset::{
    self, load_graph_path, load_tu_dataset, split_dataset, write_grid_dataset, write_manifest,
    DataError, DatasetSplit,
};
use regae_core::graph::{canonical_order, CanonicalGraph, Graph};
use regae_core::metrics::{aggregate_reports, evaluate, MetricsReport, PerGraphEval};
use regae_core::patch::to_patch_grid;
use regae_core::train::{train, write_history, TrainError};

#[derive(Parser)]
#[command(name = "regae", version, about = "Recursive graph autoencoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the 49 lattice grid graphs and their statistics summary.
    GenGrids {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a config file or preset.
    Train(TrainArgs),
    /// Encode then decode a set of graphs and report reconstruction metrics.
    Roundtrip(EvalArgs),
    /// Report reconstruction metrics for a set of graphs.
    Eval(EvalArgs),
    /// Encode one graph into an embedding file.
    Encode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode an embedding file into a graph file.
    Decode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Config file; exclusive with --preset.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset.
    #[arg(long, value_parser = PRESET_NAMES)]
    preset: Option<String>,
    /// Output directory for checkpoint, history, manifest and report.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Repeat with this many consecutive seeds and aggregate the reports.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Evaluation threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Graph file, directory of graph files, or a dataset name.
    #[arg(long)]
    graphs: String,
    /// Optional config whose m/l must match the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

enum AppError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Data(_) => 3,
            AppError::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Config(m) | AppError::Data(m) | AppError::Numeric(m) => m,
        }
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<DataError> for AppError {
    fn from(e: DataError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<CodecError> for AppError {
    fn from(e: CodecError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<CheckpointError> for AppError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Config(inner) => AppError::Config(inner.to_string()),
            other => AppError::Data(other.to_string()),
        }
    }
}

impl From<TrainError> for AppError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::EmptyTrainingSet => AppError::Data(e.to_string()),
            TrainError::NonFiniteLoss { .. } => AppError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::GenGrids { out } => cmd_gen_grids(&out),
        Command::Train(args) => cmd_train(args),
        Command::Roundtrip(args) => cmd_eval(args, true),
        Command::Eval(args) => cmd_eval(args, false),
        Command::Encode {
            checkpoint,
            graph,
            out,
        } => cmd_encode(&checkpoint, &graph, &out),
        Command::Decode {
            checkpoint,
            embedding,
            out,
        } => cmd_decode(&checkpoint, &embedding, &out),
    }
}

fn cmd_gen_grids(out: &Path) -> Result<(), AppError> {
    let stats = write_grid_dataset(out)?;
    println!(
        "wrote {} graphs to {}: avg nodes {}, max nodes {}, avg edges {}",
        stats.count,
        out.display(),
        stats.avg_nodes,
        stats.max_nodes,
        stats.avg_edges
    );
    Ok(())
}

/// Resolves a dataset field into raw graphs.
fn load_dataset(spec: &str) -> Result<Vec<Graph>, AppError> {
    match spec {
        "grid-medium" => Ok(dataset::generate_grid_dataset()),
        "grid-small" => Ok(dataset::generate_grid_range(2, 4)),
        "memorization-5" => Ok(dataset::memorization_set()),
        other => {
            if let Some(rest) = other.strip_prefix("tu:") {
                let (dir, name) = rest.rsplit_once(':').ok_or_else(|| {
                    AppError::Config(format!("dataset '{other}' is not tu:<dir>:<name>"))
                })?;
                let ds = load_tu_dataset(Path::new(dir), name)?;
                if ds.dropped_self_loops > 0 || ds.collapsed_duplicates > 0 {
                    eprintln!(
                        "note: dropped {} self-loops, collapsed {} duplicate edges",
                        ds.dropped_self_loops, ds.collapsed_duplicates
                    );
                }
                Ok(ds.graphs.into_iter().map(|(g, _)| g).collect())
            } else {
                Ok(load_graph_path(Path::new(other))?)
            }
        }
    }
}

fn build_split(config: &RunConfig) -> Result<DatasetSplit, AppError> {
    if config.dataset == "memorization-5" {
        return Ok(dataset::memorization_split());
    }
    let graphs = load_dataset(&config.dataset)?;
    Ok(split_dataset(
        &graphs,
        config.split_ratios,
        config.augmentation,
        config.seed,
    )?)
}

fn cmd_train(args: TrainArgs) -> Result<(), AppError> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), None) => RunConfig::from_file(path)?,
        (None, Some(name)) => preset(name)?,
        _ => {
            return Err(AppError::Config(
                "pass exactly one of --config or --preset".into(),
            ))
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    std::fs::create_dir_all(&args.out)?;

    let mut reports = Vec::new();
    let base_seed = config.seed;
    for k in 0..args.seeds {
        let mut run_config = config.clone();
        run_config.seed = base_seed + k;
        let split = build_split(&run_config)?;
        let result = train(&split, &run_config)?;
        // pin the resolved cap so downstream commands decode with it
        run_config.max_blocks = Some(result.max_blocks);

        let suffix = if args.seeds > 1 {
            format!("_{}", run_config.seed)
        } else {
            String::new()
        };
        save_checkpoint(
            &args.out.join(format!("model{suffix}.ckpt")),
            &result.model,
            &run_config,
        )?;
        write_history(
            &args.out.join(format!("history{suffix}.jsonl")),
            &result.history,
        )?;
        std::fs::write(
            args.out.join(format!("config{suffix}.toml")),
            run_config.to_toml(),
        )?;
        write_manifest(
            &args.out.join(format!("split{suffix}.json")),
            &split.manifest,
        )?;

        let (report, _) = evaluate(
            &split.test,
            &result.model,
            result.max_blocks,
            run_config.stop_rule,
            args.threads,
        );
        let last = result.history.last().expect("at least one epoch");
        println!(
            "seed {}: {} epochs, best valid {:.6} (epoch {}), test f1 {:.4}, size acc {:.4}",
            run_config.seed,
            last.epoch,
            result.best_valid_loss,
            result.best_epoch,
            report.f1,
            report.size_accuracy
        );
        write_json(&args.out.join(format!("report{suffix}.json")), &report)?;
        reports.push(report);
    }

    if args.seeds > 1 {
        let aggregate = aggregate_reports(&reports);
        println!(
            "aggregate over {} seeds: f1 {:.4} +- {:.4}, size acc {:.4} +- {:.4}",
            aggregate.runs,
            aggregate.mean.f1,
            aggregate.std.f1,
            aggregate.mean.size_accuracy,
            aggregate.std.size_accuracy
        );
        write_json(&args.out.join("aggregate.json"), &aggregate)?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct EvalOutput {
    report: MetricsReport,
    per_graph: Vec<PerGraphEval>,
}

fn cmd_eval(args: EvalArgs, per_graph_table: bool) -> Result<(), AppError> {
    let (model, ckpt_config) = load_checkpoint(&args.checkpoint)?;
    if let Some(path) = &args.config {
        let other = RunConfig::from_file(path)?;
        if other.m != ckpt_config.m || other.l != ckpt_config.l {
            return Err(AppError::Config(format!(
                "config m/l = {}/{} does not match checkpoint m/l = {}/{}",
                other.m, other.l, ckpt_config.m, ckpt_config.l
            )));
        }
    }
    let graphs: Vec<CanonicalGraph> = load_dataset(&args.graphs)?
        .iter()
        .map(canonical_order)
        .collect();
    let max_blocks = ckpt_config.max_blocks.unwrap_or(64);
    let (report, rows) = evaluate(
        &graphs,
        &model,
        max_blocks,
        ckpt_config.stop_rule,
        args.threads,
    );
    if per_graph_table {
        println!("{:>6} {:>6} {:>8}", "n", "n_hat", "f1");
        for row in &rows {
            println!("{:>6} {:>6} {:>8.4}", row.n, row.n_hat, row.f1);
        }
    }
    println!(
        "graphs {}: f1 {:.4} precision {:.4} recall {:.4} size acc {:.4} mean size err {:.4}",
        report.graphs,
        report.f1,
        report.precision,
        report.recall,
        report.size_accuracy,
        report.mean_size_error
    );
    if let Some(out) = &args.out {
        if per_graph_table {
            write_json(
                out,
                &EvalOutput {
                    report,
                    per_graph: rows,
                },
            )?;
        } else {
            write_json(out, &report)?;
        }
    }
    Ok(())
}

fn cmd_encode(checkpoint: &Path, graph: &Path, out: &Path) -> Result<(), AppError> {
    let (model, _) = load_checkpoint(checkpoint)?;
    let g = dataset::read_graph(graph)?;
    let canonical = canonical_order(&g);
    let grid = to_patch_grid(&canonical, model.config.l);
    let (embedding, _) = embed(&model, &grid);
    write_embedding(out, &embedding)?;
    println!(
        "wrote embedding of dimension {} to {}",
        embedding.len(),
        out.display()
    );
    Ok(())
}

fn cmd_decode(checkpoint: &Path, embedding: &Path, out: &Path) -> Result<(), AppError> {
    let (model, config) = load_checkpoint(checkpoint)?;
    let values = read_embedding(embedding)?;
    if values.len() != model.config.m {
        return Err(AppError::Data(format!(
            "embedding length {} does not match model m = {}",
            values.len(),
            model.config.m
        )));
    }
    let max_blocks = config.max_blocks.unwrap_or(64);
    let result = decode(&model, &values, max_blocks, config.stop_rule);
    dataset::write_graph(out, &result.a_hat.to_graph())?;
    println!(
        "decoded graph with n_hat = {}{} to {}",
        result.n_hat,
        if result.truncated {
            " (truncated at the block cap)"
        } else {
            ""
        },
        out.display()
    );
    Ok(())
}
