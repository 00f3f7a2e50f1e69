//! Pairwise ranking training: pair sampling with tie rejection, the margin
//! ranking loss `max(0, 1 - y (s_u - s_v))`, exact reverse-mode gradients
//! through the whole forward pass, Adam, and the epoch loop.
//!
//! Everything is driven by one seed: shuffling, pair sampling and dropout
//! masks all derive their generators from (seed, epoch, sample index), so a
//! run is reproducible bit for bit regardless of thread count.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centrality::{brandes_betweenness, degree_mass, DegreeMassMatrix};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{
    column_sums, matmul_x_wt, matmul_xt_y, relu_backward_inplace, row_l2_normalize_backward,
    spmv_rows, Mat,
};
use crate::model::{
    forward_with_masses, init_params, Dense, ForwardTrace, Hyperparams, Mode, ModelParams,
};
use crate::preprocess::prune;

/// One supervised graph: the pruned graph, its exact betweenness, and the
/// degree-mass features for both directions (cached once, reused every epoch).
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub graph: Graph,
    pub truth: Vec<f64>,
    pub masses_in: DegreeMassMatrix,
    pub masses_out: DegreeMassMatrix,
}

impl TrainingSample {
    /// Prune, compute exact ground truth on the pruned graph, and cache the
    /// feature matrices.
    pub fn prepare(original: &Graph, hop_order: usize) -> TrainingSample {
        let pruned = prune(original).reduced;
        let truth = brandes_betweenness(&pruned);
        let masses_in = degree_mass(&pruned, hop_order);
        let masses_out = degree_mass(pruned.transpose(), hop_order);
        TrainingSample {
            graph: pruned,
            truth,
            masses_in,
            masses_out,
        }
    }

    /// Build from an already-pruned graph with known scores.
    pub fn from_parts(graph: Graph, truth: Vec<f64>, hop_order: usize) -> TrainingSample {
        let masses_in = degree_mass(&graph, hop_order);
        let masses_out = degree_mass(graph.transpose(), hop_order);
        TrainingSample {
            graph,
            truth,
            masses_in,
            masses_out,
        }
    }
}

/// One ranking constraint: `label = +1` iff `truth[u] > truth[v]`. Pairs
/// with tied ground truth are never emitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePair {
    pub u: usize,
    pub v: usize,
    pub label: f64,
}

/// Uniform pairs with tie rejection. Each draw picks an ordered pair of
/// distinct nodes uniformly and keeps it iff the ground truths differ, so
/// every non-tied unordered pair is equally likely.
pub fn sample_pairs(truth: &[f64], count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<NodePair>> {
    let n = truth.len();
    if n < 2 || truth.iter().all(|&t| t == truth[0]) {
        return Err(Error::Unrankable);
    }
    let mut pairs = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let budget = count.saturating_mul(10_000).max(10_000);
    while pairs.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Unrankable);
        }
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v || truth[u] == truth[v] {
            continue;
        }
        let label = if truth[u] > truth[v] { 1.0 } else { -1.0 };
        pairs.push(NodePair { u, v, label });
    }
    Ok(pairs)
}

/// Margin ranking loss for one pair.
pub fn margin_ranking_loss(s_u: f64, s_v: f64, label: f64) -> f64 {
    (1.0 - label * (s_u - s_v)).max(0.0)
}

/// Mean margin loss of a batch of pairs over one score vector.
pub fn batch_loss(scores: &[f64], pairs: &[NodePair]) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|p| margin_ranking_loss(scores[p.u], scores[p.v], p.label))
        .sum();
    total / pairs.len() as f64
}

fn accumulate(grad: &mut Dense, delta_weight: Mat, delta_bias: Vec<f64>) {
    for (slot, v) in grad.weight.iter_mut().zip(delta_weight.data) {
        *slot += v;
    }
    for (slot, v) in grad.bias.iter_mut().zip(delta_bias) {
        *slot += v;
    }
}

fn mat_add_inplace(acc: &mut Mat, other: &Mat) {
    debug_assert_eq!(acc.data.len(), other.data.len());
    for (a, &b) in acc.data.iter_mut().zip(&other.data) {
        *a += b;
    }
}

/// Backward pass through one shared-MLP application. `grad_out` is the
/// gradient on the MLP output column; returns the gradient on the MLP input
/// and accumulates weight gradients.
fn mlp_backward(
    cache: &crate::model::MlpCache,
    grad_out: Mat,
    mlp: &[Dense],
    grads: &mut [Dense],
) -> Mat {
    let mut grad = grad_out;
    for idx in (0..mlp.len()).rev() {
        if idx + 1 != mlp.len() {
            // grad is w.r.t. the post-dropout hidden activation.
            if let Some(mask) = &cache.masks[idx] {
                for (g, &m) in grad.data.iter_mut().zip(mask) {
                    *g *= m;
                }
            }
            relu_backward_inplace(&cache.pre[idx], &mut grad);
        }
        accumulate(
            &mut grads[idx],
            matmul_xt_y(&cache.inputs[idx], &grad),
            column_sums(&grad),
        );
        grad = matmul_x_wt(&grad, &mlp[idx].weight_mat());
    }
    grad
}

/// Backward pass through one direction. `forward_adj` is the adjacency the
/// direction aggregated over; `reverse_adj` is its transpose (the adjoint of
/// `H -> A H` is `G -> A^T G`).
#[allow(clippy::too_many_arguments)]
fn direction_backward(
    forward_adj: &Graph,
    reverse_adj: &Graph,
    trace: &crate::model::DirectionTrace,
    features: &Mat,
    dy: &[f64],
    params: &ModelParams,
    hp: &Hyperparams,
    grads: &mut ModelParams,
) {
    let n = forward_adj.node_count();
    let hidden = hp.hidden;
    let mut d_hidden = Mat::zeros(n, hidden);
    for l in (0..params.passes.len()).rev() {
        let layer = &trace.layers[l];
        // The direction score is the sum of per-layer MLP outputs, so each
        // application receives the full dy.
        let d_from_mlp = mlp_backward(
            &layer.mlp,
            Mat::column(n, dy.to_vec()),
            &params.mlp,
            &mut grads.mlp,
        );
        mat_add_inplace(&mut d_hidden, &d_from_mlp);
        let mut d_pre = row_l2_normalize_backward(&layer.activated, &d_hidden);
        relu_backward_inplace(&layer.pre, &mut d_pre);
        accumulate(
            &mut grads.passes[l],
            matmul_xt_y(&layer.aggregated, &d_pre),
            column_sums(&d_pre),
        );
        let d_aggregated = matmul_x_wt(&d_pre, &params.passes[l].weight_mat());
        d_hidden = spmv_rows(reverse_adj, &d_aggregated);
    }
    if let Some(embed_cache) = &trace.embed_mlp {
        // depth == 0 fallback: the MLP read the embedding directly.
        d_hidden = mlp_backward(
            embed_cache,
            Mat::column(n, dy.to_vec()),
            &params.mlp,
            &mut grads.mlp,
        );
    }
    let mut d_embed_pre = d_hidden;
    relu_backward_inplace(&trace.embed_pre, &mut d_embed_pre);
    accumulate(
        &mut grads.embed,
        matmul_xt_y(features, &d_embed_pre),
        column_sums(&d_embed_pre),
    );
}

/// One train-mode forward on the pruned graph plus exact reverse-mode
/// gradients of the mean margin loss over `pairs` with respect to every
/// parameter.
pub fn loss_and_gradients(
    sample: &TrainingSample,
    pairs: &[NodePair],
    params: &ModelParams,
    hp: &Hyperparams,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<(f64, ModelParams)> {
    if pairs.is_empty() {
        return Err(Error::Contract("gradient step needs at least one pair".into()));
    }
    let trace: ForwardTrace = forward_with_masses(
        &sample.graph,
        &sample.masses_in,
        &sample.masses_out,
        params,
        hp,
        Mode::Train { dropout_rng },
    )?;
    let scores = trace.scores();
    let n = sample.graph.node_count();
    let batch = pairs.len() as f64;

    let mut loss_total = 0.0;
    let mut d_scores = vec![0.0; n];
    for pair in pairs {
        let margin = 1.0 - pair.label * (scores[pair.u] - scores[pair.v]);
        if margin > 0.0 {
            loss_total += margin;
            d_scores[pair.u] -= pair.label / batch;
            d_scores[pair.v] += pair.label / batch;
        }
    }
    let loss = loss_total / batch;

    // score = y_in * y_out elementwise.
    let dy_in: Vec<f64> = d_scores
        .iter()
        .zip(trace.y_out())
        .map(|(&d, &y)| d * y)
        .collect();
    let dy_out: Vec<f64> = d_scores
        .iter()
        .zip(trace.y_in())
        .map(|(&d, &y)| d * y)
        .collect();

    let mut grads = params.zeros_like();
    let features_in = crate::model::normalize_features(&sample.masses_in);
    let features_out = crate::model::normalize_features(&sample.masses_out);
    let g = &sample.graph;
    direction_backward(g, g.transpose(), &trace.incoming, &features_in, &dy_in, params, hp, &mut grads);
    direction_backward(g.transpose(), g, &trace.outgoing, &features_out, &dy_out, params, hp, &mut grads);
    Ok((loss, grads))
}

/// Adam state: first/second moments per parameter plus the step counter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: ModelParams,
    second_moment: ModelParams,
}

impl OptimizerState {
    pub fn new(template: &ModelParams, learning_rate: f64) -> Self {
        OptimizerState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: template.zeros_like(),
            second_moment: template.zeros_like(),
        }
    }
}

/// Standard Adam update with bias correction. Aborts with diagnostics on a
/// non-finite gradient.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimizerState,
) -> Result<()> {
    for (name, tensor) in grads.tensors() {
        if let Some(index) = tensor.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                tensor: name,
                index,
                value: tensor[index],
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let correction1 = 1.0 - state.beta1.powi(t);
    let correction2 = 1.0 - state.beta2.powi(t);
    let grad_tensors: Vec<&[f64]> = grads.tensors().into_iter().map(|(_, t)| t).collect();
    let mut param_tensors = params.tensors_mut();
    let mut m_tensors = state.first_moment.tensors_mut();
    let mut v_tensors = state.second_moment.tensors_mut();
    for (((p, g), m), v) in param_tensors
        .iter_mut()
        .zip(grad_tensors)
        .zip(m_tensors.iter_mut())
        .zip(v_tensors.iter_mut())
    {
        for k in 0..p.len() {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            let m_hat = m[k] / correction1;
            let v_hat = v[k] / correction2;
            p[k] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Pair budget per graph per epoch, as a multiple of its node count.
    pub pairs_per_node: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 10,
            learning_rate: 5e-3,
            pairs_per_node: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_seconds: f64,
}

pub type TrainingLog = Vec<EpochStats>;

/// Training log as CSV `epoch,mean_loss,wall_seconds`.
pub fn training_log_csv(log: &TrainingLog) -> String {
    let mut out = String::from("epoch,mean_loss,wall_seconds\n");
    for row in log {
        out.push_str(&format!("{},{},{}\n", row.epoch, row.mean_loss, row.wall_seconds));
    }
    out
}

const STREAM_SHUFFLE: u64 = 1;
const STREAM_PAIRS: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

/// Independent sub-seed per (purpose, epoch, sample); SplitMix64 finalizer.
fn derive_seed(master: u64, stream: u64, epoch: u64, sample: u64) -> u64 {
    let mut z = master
        ^ stream.wrapping_mul(0x9E3779B97F4A7C15)
        ^ epoch.wrapping_mul(0xC2B2AE3D27D4EB4F)
        ^ sample.wrapping_mul(0x165667B19E3779F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn shuffled_order(len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    // Fisher-Yates.
    for i in (1..len).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// Result of a training run; the optimizer state makes checkpoints resumable.
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: TrainingLog,
    pub optimizer: OptimizerState,
}

/// Train for `opts.epochs` epochs: per epoch the samples are visited in a
/// seeded-shuffled order and each contributes one batch of sampled pairs,
/// one gradient evaluation, and one Adam step.
pub fn train(
    samples: &[TrainingSample],
    hp: &Hyperparams,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::Config("training needs at least one sample".into()));
    }
    let mut params = init_params(hp, opts.seed)?;
    let mut state = OptimizerState::new(&params, opts.learning_rate);
    let mut log = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let start = Instant::now();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, STREAM_SHUFFLE, epoch as u64, 0));
        let order = shuffled_order(samples.len(), &mut shuffle_rng);
        let mut loss_sum = 0.0;
        for &index in &order {
            let sample = &samples[index];
            let count = opts.pairs_per_node * sample.graph.node_count().max(1);
            let mut pair_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                opts.seed,
                STREAM_PAIRS,
                epoch as u64,
                index as u64,
            ));
            let pairs = sample_pairs(&sample.truth, count, &mut pair_rng)?;
            let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                opts.seed,
                STREAM_DROPOUT,
                epoch as u64,
                index as u64,
            ));
            let (loss, grads) = loss_and_gradients(sample, &pairs, &params, hp, &mut dropout_rng)?;
            adam_step(&mut params, &grads, &mut state)?;
            loss_sum += loss;
        }
        log.push(EpochStats {
            epoch,
            mean_loss: loss_sum / samples.len() as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutcome {
        params,
        log,
        optimizer: state,
    })
}

/// Model file plus optimizer state, for resumable training.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: crate::model::ModelFile,
    pub optimizer: OptimizerState,
}

pub fn save_checkpoint<P: AsRef<std::path::Path>>(
    path: P,
    hp: &Hyperparams,
    params: &ModelParams,
    optimizer: &OptimizerState,
) -> Result<()> {
    let checkpoint = Checkpoint {
        model: crate::model::to_model_file(hp, params),
        optimizer: optimizer.clone(),
    };
    let json = serde_json::to_string(&checkpoint)
        .map_err(|e| Error::Contract(format!("checkpoint serialization failed: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint<P: AsRef<std::path::Path>>(
    path: P,
) -> Result<(Hyperparams, ModelParams, OptimizerState)> {
    let text = std::fs::read_to_string(path)?;
    let checkpoint: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("invalid checkpoint: {e}"),
    })?;
    let (hp, params) = crate::model::from_model_file(&checkpoint.model)?;
    Ok((hp, params, checkpoint.optimizer))
}
