//! The six pipeline commands as library functions. `main` is a thin shell
//! over these so integration tests can drive them directly.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use brava_core::centrality::{brandes_betweenness, degree_mass};
use brava_core::eval::{export_ranking_report_with_ids, RankingReport};
use brava_core::graph::{
    build_graph, load_edge_list, load_scores, save_edge_list, save_scores, EdgeList, Graph,
};
use brava_core::model::{
    forward_with_masses, load_model, save_model, Hyperparams, Mode, ModelParams,
};
use brava_core::preprocess::{prune, reinsert_scores};
use brava_core::synth::{
    generate_hyperbolic, generate_scale_free, sample_training_config, EmpiricalParamTable,
};
use brava_core::train::{train, training_log_csv, TrainOptions, TrainingSample};

use crate::config::PipelineConfig;

/// One generated training graph as recorded in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub index: usize,
    pub kind: String,
    pub file: PathBuf,
    pub nodes: usize,
    pub seed: u64,
    pub attach_m: Option<usize>,
    pub gamma: Option<f64>,
    pub avg_degree: Option<f64>,
    pub temperature: Option<f64>,
}

pub struct GenerateOutput {
    pub manifest_path: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

fn optional<T: std::fmt::Display>(value: &Option<T>) -> String {
    value.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::from("index,kind,file,nodes,seed,attach_m,gamma,avg_degree,temperature\n");
    for e in entries {
        // File names are stored relative to the manifest so identical
        // configs produce identical bytes regardless of the workdir.
        let name = e
            .file
            .file_name()
            .ok_or_else(|| anyhow!("graph file without a name: {}", e.file.display()))?;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            e.index,
            e.kind,
            name.to_string_lossy(),
            e.nodes,
            e.seed,
            optional(&e.attach_m),
            optional(&e.gamma),
            optional(&e.avg_degree),
            optional(&e.temperature),
        ));
    }
    atomic_write(path, out.as_bytes())
}

fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            bail!("manifest line {}: expected 9 columns", idx + 1);
        }
        let opt = |s: &str| -> Option<String> {
            if s.is_empty() {
                None
            } else {
                Some(s.to_string())
            }
        };
        entries.push(ManifestEntry {
            index: cols[0].parse()?,
            kind: cols[1].to_string(),
            file: base.join(cols[2]),
            nodes: cols[3].parse()?,
            seed: cols[4].parse()?,
            attach_m: opt(cols[5]).map(|s| s.parse()).transpose()?,
            gamma: opt(cols[6]).map(|s| s.parse()).transpose()?,
            avg_degree: opt(cols[7]).map(|s| s.parse()).transpose()?,
            temperature: opt(cols[8]).map(|s| s.parse()).transpose()?,
        });
    }
    Ok(entries)
}

/// Generate the synthetic training set: scale-free graphs first, then
/// hyperbolic graphs with parameters sampled from the empirical table.
/// Deterministic given the config, byte for byte.
pub fn cmd_generate(cfg: &PipelineConfig) -> Result<GenerateOutput> {
    let graphs_dir = cfg.workdir.join("graphs");
    std::fs::create_dir_all(&graphs_dir)?;
    let table = match &cfg.param_table {
        Some(path) => EmpiricalParamTable::from_csv_path(path)
            .with_context(|| format!("loading parameter table {}", path.display()))?,
        None => EmpiricalParamTable::builtin(),
    };
    let (sf_count, hrg_count) = cfg.counts_for_mix();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut entries = Vec::new();
    for index in 0..sf_count {
        let seed = rng.gen::<u64>();
        let graph = generate_scale_free(cfg.nodes, cfg.attach_m, seed)
            .with_context(|| format!("generating scale-free graph {index}"))?;
        let file = graphs_dir.join(format!("sf_{index:03}.edges"));
        save_generated(&file, &graph)?;
        entries.push(ManifestEntry {
            index,
            kind: "scale-free".into(),
            file,
            nodes: cfg.nodes,
            seed,
            attach_m: Some(cfg.attach_m),
            gamma: None,
            avg_degree: None,
            temperature: None,
        });
    }
    for offset in 0..hrg_count {
        let index = sf_count + offset;
        let hrg_cfg = sample_training_config(&table, cfg.nodes, &mut rng);
        let graph = generate_hyperbolic(&hrg_cfg)
            .with_context(|| format!("generating hyperbolic graph {index}"))?;
        let file = graphs_dir.join(format!("hrg_{index:03}.edges"));
        save_generated(&file, &graph)?;
        entries.push(ManifestEntry {
            index,
            kind: "hyperbolic".into(),
            file,
            nodes: cfg.nodes,
            seed: hrg_cfg.seed,
            attach_m: None,
            gamma: Some(hrg_cfg.gamma),
            avg_degree: Some(hrg_cfg.avg_degree),
            temperature: Some(hrg_cfg.temperature),
        });
    }
    let manifest_path = graphs_dir.join("manifest.csv");
    write_manifest(&manifest_path, &entries)?;
    Ok(GenerateOutput {
        manifest_path,
        entries,
    })
}

/// Store one undirected edge per line (u < v order by construction).
fn save_generated(path: &Path, graph: &Graph) -> Result<()> {
    let mut edges = Vec::with_capacity(graph.arc_count() / 2);
    for u in 0..graph.node_count() {
        for &v in graph.neighbors(u) {
            if (u as u32) < v {
                edges.push((u as u64, v as u64));
            }
        }
    }
    save_edge_list(path, &EdgeList::new(edges, false))?;
    Ok(())
}

/// Reuse an existing manifest when every listed file is still present,
/// otherwise (re)generate. Regeneration is deterministic, so a stale
/// partial state is simply overwritten.
pub fn ensure_generated(cfg: &PipelineConfig) -> Result<GenerateOutput> {
    let manifest_path = cfg.workdir.join("graphs").join("manifest.csv");
    if manifest_path.exists() {
        let entries = read_manifest(&manifest_path)?;
        let expected = cfg.sf_count + cfg.hrg_count;
        if entries.len() == expected && entries.iter().all(|e| e.file.exists()) {
            return Ok(GenerateOutput {
                manifest_path,
                entries,
            });
        }
    }
    cmd_generate(cfg)
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading graph {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Write-temp-then-rename so concurrent pipeline runs can share a cache.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub struct GroundTruthOutput {
    pub score_path: PathBuf,
    pub cache_hit: bool,
    /// Surviving (un-pruned) nodes as original ids with their exact
    /// betweenness in the pruned graph.
    pub scores: Vec<(u64, f64)>,
}

/// Exact ground truth for a graph file: prune, Brandes on the pruned graph,
/// and a score file keyed by the content hash of the input. A second call on
/// an unchanged file is a cache hit and skips the computation.
pub fn cmd_ground_truth(graph_path: &Path, directed: bool, workdir: &Path) -> Result<GroundTruthOutput> {
    let cache_dir = workdir.join("cache");
    std::fs::create_dir_all(&cache_dir)?;
    let key = file_sha256(graph_path)?;
    let marker = if directed { "d" } else { "u" };
    let score_path = cache_dir.join(format!("{key}.{marker}.scores"));
    if score_path.exists() {
        let scores = load_scores(&score_path)?;
        return Ok(GroundTruthOutput {
            score_path,
            cache_hit: true,
            scores,
        });
    }
    let graph = build_graph(&load_edge_list(graph_path, directed)?);
    let reduced = prune(&graph).reduced;
    let values = brandes_betweenness(&reduced);
    let ids: Vec<u64> = reduced.original_ids().to_vec();
    let tmp = score_path.with_extension(format!("tmp.{}", std::process::id()));
    save_scores(&tmp, &ids, &values)?;
    std::fs::rename(&tmp, &score_path)?;
    Ok(GroundTruthOutput {
        score_path,
        cache_hit: false,
        scores: ids.into_iter().zip(values).collect(),
    })
}

/// Training sample backed by the ground-truth cache.
fn prepare_sample(graph_path: &Path, directed: bool, cfg: &PipelineConfig) -> Result<TrainingSample> {
    let truth = cmd_ground_truth(graph_path, directed, &cfg.workdir)?;
    let graph = build_graph(&load_edge_list(graph_path, directed)?);
    let reduced = prune(&graph).reduced;
    let by_id: HashMap<u64, f64> = truth.scores.iter().copied().collect();
    let mut values = Vec::with_capacity(reduced.node_count());
    for &id in reduced.original_ids() {
        values.push(*by_id.get(&id).ok_or_else(|| {
            anyhow!(
                "cached truth {} is missing node {id}; delete the cache and retry",
                truth.score_path.display()
            )
        })?);
    }
    Ok(TrainingSample::from_parts(
        reduced,
        values,
        cfg.hyperparams.hop_order,
    ))
}

pub struct TrainedModel {
    pub seed: u64,
    pub model_path: PathBuf,
    pub log_path: PathBuf,
    pub final_mean_loss: Option<f64>,
    pub params: ModelParams,
}

pub struct TrainOutput {
    pub models: Vec<TrainedModel>,
}

/// Train one model per configured seed on the generated training set.
/// Writes a model file, a resumable checkpoint, and a loss log per seed.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainOutput> {
    let generated = ensure_generated(cfg)?;
    let mut samples = Vec::with_capacity(generated.entries.len());
    for entry in &generated.entries {
        samples.push(
            prepare_sample(&entry.file, false, cfg)
                .with_context(|| format!("preparing sample {}", entry.file.display()))?,
        );
    }
    let models_dir = cfg.workdir.join("models");
    std::fs::create_dir_all(&models_dir)?;
    let mut models = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let opts = TrainOptions {
            epochs: cfg.epochs,
            learning_rate: cfg.learning_rate,
            pairs_per_node: cfg.pairs_per_node,
            seed,
        };
        let outcome = train(&samples, &cfg.hyperparams, &opts)
            .with_context(|| format!("training seed {seed}"))?;
        let model_path = models_dir.join(format!("model_seed{seed}.json"));
        save_model(&model_path, &cfg.hyperparams, &outcome.params)?;
        brava_core::train::save_checkpoint(
            models_dir.join(format!("checkpoint_seed{seed}.json")),
            &cfg.hyperparams,
            &outcome.params,
            &outcome.optimizer,
        )?;
        let log_path = models_dir.join(format!("train_log_seed{seed}.csv"));
        std::fs::write(&log_path, training_log_csv(&outcome.log))?;
        models.push(TrainedModel {
            seed,
            model_path,
            log_path,
            final_mean_loss: outcome.log.last().map(|e| e.mean_loss),
            params: outcome.params,
        });
    }
    Ok(TrainOutput { models })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InferTiming {
    pub prune_seconds: f64,
    pub features_seconds: f64,
    pub forward_seconds: f64,
}

impl InferTiming {
    pub fn total(&self) -> f64 {
        self.prune_seconds + self.features_seconds + self.forward_seconds
    }
}

/// prune -> degree masses -> eval-mode forward -> sentinel reinsertion.
/// Returns one score per node of `graph` plus the phase timings.
pub fn run_inference(
    hp: &Hyperparams,
    params: &ModelParams,
    graph: &Graph,
) -> Result<(Vec<f64>, InferTiming)> {
    let start = Instant::now();
    let pruned = prune(graph);
    let prune_seconds = start.elapsed().as_secs_f64();

    if pruned.reduced.node_count() == 0 {
        let scores = reinsert_scores(&pruned, &[])?;
        return Ok((
            scores,
            InferTiming {
                prune_seconds,
                features_seconds: 0.0,
                forward_seconds: 0.0,
            },
        ));
    }

    let start = Instant::now();
    let masses_in = degree_mass(&pruned.reduced, hp.hop_order);
    let masses_out = degree_mass(pruned.reduced.transpose(), hp.hop_order);
    let features_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let trace = forward_with_masses(&pruned.reduced, &masses_in, &masses_out, params, hp, Mode::Eval)?;
    let scores = reinsert_scores(&pruned, trace.scores())?;
    let forward_seconds = start.elapsed().as_secs_f64();

    Ok((
        scores,
        InferTiming {
            prune_seconds,
            features_seconds,
            forward_seconds,
        },
    ))
}

pub struct InferOutput {
    pub score_path: PathBuf,
    pub timing: InferTiming,
    pub ids: Vec<u64>,
    pub scores: Vec<f64>,
}

/// Score every node of a graph file with a trained model.
pub fn cmd_infer(
    model_path: &Path,
    graph_path: &Path,
    directed: bool,
    output: &Path,
) -> Result<InferOutput> {
    let (hp, params) = load_model(model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let graph = build_graph(&load_edge_list(graph_path, directed)?);
    let (scores, timing) = run_inference(&hp, &params, &graph)?;
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let ids = graph.original_ids().to_vec();
    save_scores(output, &ids, &scores)?;
    Ok(InferOutput {
        score_path: output.to_path_buf(),
        timing,
        ids,
        scores,
    })
}

/// Full-graph truth vector from a pruned-truth score file: survivors carry
/// their stored scores; nodes absent from the file (the pruned ones, all of
/// zero betweenness) share a sentinel strictly below every stored score,
/// mirroring the sentinel reinsertion on the prediction side.
pub fn truth_vector(graph: &Graph, truth_scores: &[(u64, f64)]) -> Result<Vec<f64>> {
    let by_id: HashMap<u64, f64> = truth_scores.iter().copied().collect();
    let sentinel = truth_scores
        .iter()
        .map(|&(_, s)| s)
        .fold(f64::INFINITY, f64::min);
    let sentinel = if sentinel.is_finite() { sentinel - 1.0 } else { 0.0 };
    Ok(graph
        .original_ids()
        .iter()
        .map(|id| by_id.get(id).copied().unwrap_or(sentinel))
        .collect())
}

pub struct EvaluateOutput {
    pub report_path: PathBuf,
    pub report: RankingReport,
    pub timing: InferTiming,
}

/// Evaluate a model against ground truth (computed through the cache unless
/// a truth file is given) and export the per-node ranking report.
pub fn cmd_evaluate(
    model_path: &Path,
    graph_path: &Path,
    truth_path: Option<&Path>,
    directed: bool,
    workdir: &Path,
    report_path: &Path,
) -> Result<EvaluateOutput> {
    let (hp, params) = load_model(model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let graph = build_graph(&load_edge_list(graph_path, directed)?);
    let truth_scores = match truth_path {
        Some(path) => load_scores(path)?,
        None => cmd_ground_truth(graph_path, directed, workdir)?.scores,
    };
    let truth = truth_vector(&graph, &truth_scores)?;
    let (predicted, timing) = run_inference(&hp, &params, &graph)?;
    if let Some(parent) = report_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let report =
        export_ranking_report_with_ids(graph.original_ids(), &truth, &predicted, report_path)?;
    Ok(EvaluateOutput {
        report_path: report_path.to_path_buf(),
        report,
        timing,
    })
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub graph: String,
    pub per_seed_tau: Vec<f64>,
    pub mean_tau: f64,
    pub std_tau: f64,
    pub mean_inference_seconds: f64,
}

pub struct PipelineOutput {
    pub summary_path: PathBuf,
    pub rows: Vec<SummaryRow>,
    pub models: Vec<TrainedModel>,
}

/// Sample mean and standard deviation (n-1 denominator; 0 for a single run).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// End-to-end run: generate, ground truths, one training run per seed, then
/// inference and evaluation on every test graph. The summary CSV carries one
/// row per test graph with mean/std tau-b across seeds and the mean
/// inference time (compute only; truth I/O excluded).
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    if cfg.test_graphs.is_empty() {
        bail!("pipeline needs at least one test graph (eval.test_graphs)");
    }
    for path in &cfg.test_graphs {
        cmd_ground_truth(path, cfg.directed, &cfg.workdir)
            .with_context(|| format!("ground truth for {}", path.display()))?;
    }
    let trained = cmd_train(cfg)?;
    let reports_dir = cfg.workdir.join("reports");
    std::fs::create_dir_all(&reports_dir)?;

    // File stems label the summary rows; disambiguate duplicates by position.
    let mut labels = Vec::with_capacity(cfg.test_graphs.len());
    for (i, path) in cfg.test_graphs.iter().enumerate() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "graph".into());
        let duplicated = cfg
            .test_graphs
            .iter()
            .enumerate()
            .any(|(j, other)| j != i && other.file_stem() == path.file_stem());
        labels.push(if duplicated { format!("{stem}_{i}") } else { stem });
    }

    let mut rows = Vec::with_capacity(cfg.test_graphs.len());
    for (graph_path, stem) in cfg.test_graphs.iter().zip(&labels) {
        let graph = build_graph(&load_edge_list(graph_path, cfg.directed)?);
        let truth_scores = cmd_ground_truth(graph_path, cfg.directed, &cfg.workdir)?.scores;
        let truth = truth_vector(&graph, &truth_scores)?;
        let mut taus = Vec::with_capacity(trained.models.len());
        let mut seconds = Vec::with_capacity(trained.models.len());
        for model in &trained.models {
            let (predicted, timing) = run_inference(&cfg.hyperparams, &model.params, &graph)?;
            let report_path = reports_dir.join(format!("{stem}_seed{}.csv", model.seed));
            let report = export_ranking_report_with_ids(
                graph.original_ids(),
                &truth,
                &predicted,
                &report_path,
            )?;
            let tau = report.summary.tau_b.ok_or_else(|| {
                anyhow!("tau-b undefined for {stem} seed {} (fully tied ranking)", model.seed)
            })?;
            taus.push(tau);
            seconds.push(timing.total());
        }
        let (mean_tau, std_tau) = mean_std(&taus);
        let (mean_seconds, _) = mean_std(&seconds);
        rows.push(SummaryRow {
            graph: stem.clone(),
            per_seed_tau: taus,
            mean_tau,
            std_tau,
            mean_inference_seconds: mean_seconds,
        });
    }

    let summary_path = cfg.workdir.join("summary.csv");
    let mut out = String::from("graph,mean_tau_b,std_tau_b,mean_inference_seconds\n");
    for row in &rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.graph, row.mean_tau, row.std_tau, row.mean_inference_seconds
        ));
    }
    atomic_write(&summary_path, out.as_bytes())?;
    Ok(PipelineOutput {
        summary_path,
        rows,
        models: trained.models,
    })
}
