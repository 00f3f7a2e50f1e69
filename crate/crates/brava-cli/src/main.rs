use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use brava_cli::commands::{
    cmd_evaluate, cmd_generate, cmd_ground_truth, cmd_infer, cmd_pipeline, cmd_train,
};
use brava_cli::config::{resolve_config, Overrides};

/// Betweenness-centrality ranking toolkit: synthetic training graphs, exact
/// ground truth, model training, inference and ranking evaluation.
#[derive(Parser)]
#[command(name = "brava", version)]
struct Cli {
    /// Config file (flat key = value with [section] headers); flags of the
    /// same name override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Size of the rayon thread pool (defaults to the core count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic training graphs plus a manifest.
    Generate,
    /// Compute (or reuse) exact pruned-graph betweenness for a graph file.
    GroundTruth {
        graph: PathBuf,
    },
    /// Train one model per configured seed on the generated training set.
    Train,
    /// Score every node of a graph with a trained model.
    Infer {
        #[arg(long)]
        model: PathBuf,
        graph: PathBuf,
        /// Score file destination (default: <workdir>/scores/<stem>.scores).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare model scores against ground truth and export the report.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        graph: PathBuf,
        /// Pruned-truth score file; computed via the cache when omitted.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Report CSV destination (default: <workdir>/reports/<stem>.csv).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Full run: generate, ground truths, per-seed training, evaluation,
    /// and the mean/std tau-b summary table.
    Pipeline,
}

fn stem(path: &std::path::Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "graph".into())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = resolve_config(cli.config.as_deref(), &cli.overrides)?;

    match cli.command {
        Command::Generate => {
            let output = cmd_generate(&cfg)?;
            for entry in &output.entries {
                println!("{} {}", entry.kind, entry.file.display());
            }
            println!("manifest: {}", output.manifest_path.display());
        }
        Command::GroundTruth { graph } => {
            let output = cmd_ground_truth(&graph, cfg.directed, &cfg.workdir)?;
            if output.cache_hit {
                println!("cache hit, skipping recomputation");
            }
            println!("scores: {}", output.score_path.display());
        }
        Command::Train => {
            let output = cmd_train(&cfg)?;
            for model in &output.models {
                match model.final_mean_loss {
                    Some(loss) => println!(
                        "seed {}: final mean loss {loss:.6} -> {}",
                        model.seed,
                        model.model_path.display()
                    ),
                    None => println!("seed {}: {}", model.seed, model.model_path.display()),
                }
            }
        }
        Command::Infer { model, graph, output } => {
            let destination = output.unwrap_or_else(|| {
                cfg.workdir
                    .join("scores")
                    .join(format!("{}.scores", stem(&graph)))
            });
            let result = cmd_infer(&model, &graph, cfg.directed, &destination)?;
            println!("scores: {}", result.score_path.display());
            println!("timing: {}", serde_json::to_string(&result.timing)?);
        }
        Command::Evaluate {
            model,
            graph,
            truth,
            report,
        } => {
            let report_path = report.unwrap_or_else(|| {
                cfg.workdir
                    .join("reports")
                    .join(format!("{}.csv", stem(&graph)))
            });
            let result = cmd_evaluate(
                &model,
                &graph,
                truth.as_deref(),
                cfg.directed,
                &cfg.workdir,
                &report_path,
            )?;
            println!("report: {}", result.report_path.display());
            println!("summary: {}", serde_json::to_string(&result.report.summary)?);
            println!("timing: {}", serde_json::to_string(&result.timing)?);
        }
        Command::Pipeline => {
            let output = cmd_pipeline(&cfg)?;
            println!("graph\tmean tau_b\tstd tau_b\tmean inference s");
            for row in &output.rows {
                println!(
                    "{}\t{:.4} ± {:.4}\t{:.4}",
                    row.graph, row.mean_tau, row.std_tau, row.mean_inference_seconds
                );
            }
            println!("summary: {}", output.summary_path.display());
        }
    }
    Ok(())
}
