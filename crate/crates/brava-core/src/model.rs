//! Dual-direction message-passing ranking model.
//!
//! Forward pass, per direction (one running over the stored adjacency `A`,
//! the other over `A^T`, with all weights shared between directions):
//!
//! 1. degree-mass features, per-column max-normalized, through a dense layer
//!    with ReLU (the embedding);
//! 2. `depth` message-passing layers `H <- rownorm(ReLU(A H W + b))`, where
//!    `rownorm` is post-activation rowwise L2 normalization and the plain
//!    `A H` product aggregates neighbors without the node's own features
//!    (self-loops are stripped at graph build time);
//! 3. after every layer a shared MLP (ReLU hidden activations, dropout in
//!    train mode, linear scalar output) scores each node and the scalars
//!    accumulate into the direction score.
//!
//! The final score is the elementwise product of the two direction scores.
//! On undirected graphs both directions see identical inputs, so the fused
//! score is an exact square and never negative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centrality::DegreeMassMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{
    add_row_bias, matmul, relu, row_l2_normalize, spmv_rows, Mat,
};

/// Model shape knobs. Defaults give the 1,333-parameter configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Degree-mass hop order `m` (number of input features per direction).
    pub hop_order: usize,
    /// Hidden width of the embedding and message-passing layers.
    pub hidden: usize,
    /// Number of message-passing layers.
    pub depth: usize,
    /// Hidden widths of the shared scoring MLP (the input width is `hidden`
    /// and the output is always a scalar).
    pub mlp_hidden: Vec<usize>,
    /// Dropout rate applied after each hidden MLP activation in train mode.
    pub dropout: f64,
    /// With `depth == 0`, apply the MLP directly to the embedding instead of
    /// returning all-zero scores (the "0 layers" ablation mode).
    pub zero_layer_mlp: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            hop_order: 6,
            hidden: 12,
            depth: 2,
            mlp_hidden: vec![24, 24],
            dropout: 0.3,
            zero_layer_mlp: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.hop_order < 1 {
            return Err(Error::Config("hop_order must be >= 1".into()));
        }
        if self.hidden < 1 {
            return Err(Error::Config("hidden must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.mlp_hidden.contains(&0) {
            return Err(Error::Config("mlp widths must be positive".into()));
        }
        Ok(())
    }

    /// Layer widths of the scoring MLP, input to output.
    pub fn mlp_widths(&self) -> Vec<usize> {
        let mut widths = Vec::with_capacity(self.mlp_hidden.len() + 2);
        widths.push(self.hidden);
        widths.extend_from_slice(&self.mlp_hidden);
        widths.push(1);
        widths
    }
}

/// One dense layer: row-major `in_dim x out_dim` weights plus a bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn glorot(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Dense {
            in_dim,
            out_dim,
            weight: (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn weight_mat(&self) -> Mat {
        Mat::from_vec(self.in_dim, self.out_dim, self.weight.clone())
    }

    /// `X W + b`.
    pub(crate) fn apply(&self, x: &Mat) -> Mat {
        let mut out = matmul(x, &self.weight_mat());
        add_row_bias(&mut out, &self.bias);
        out
    }
}

/// All learnable weights: the shared embedding, the message-passing layers
/// (shared between directions) and the shared scoring MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub embed: Dense,
    pub passes: Vec<Dense>,
    pub mlp: Vec<Dense>,
}

impl ModelParams {
    /// Matching all-zero structure, used for gradients and optimizer moments.
    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            embed: Dense::zeros(self.embed.in_dim, self.embed.out_dim),
            passes: self
                .passes
                .iter()
                .map(|d| Dense::zeros(d.in_dim, d.out_dim))
                .collect(),
            mlp: self
                .mlp
                .iter()
                .map(|d| Dense::zeros(d.in_dim, d.out_dim))
                .collect(),
        }
    }

    /// Named flat views over every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("embed.weight".into(), &self.embed.weight),
            ("embed.bias".into(), &self.embed.bias),
        ];
        for (l, dense) in self.passes.iter().enumerate() {
            out.push((format!("pass{l}.weight"), &dense.weight));
            out.push((format!("pass{l}.bias"), &dense.bias));
        }
        for (l, dense) in self.mlp.iter().enumerate() {
            out.push((format!("mlp{l}.weight"), &dense.weight));
            out.push((format!("mlp{l}.bias"), &dense.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = vec![&mut self.embed.weight, &mut self.embed.bias];
        for dense in &mut self.passes {
            out.push(&mut dense.weight);
            out.push(&mut dense.bias);
        }
        for dense in &mut self.mlp {
            out.push(&mut dense.weight);
            out.push(&mut dense.bias);
        }
        out
    }

    fn matches(&self, hp: &Hyperparams) -> bool {
        let widths = hp.mlp_widths();
        self.embed.in_dim == hp.hop_order
            && self.embed.out_dim == hp.hidden
            && self.passes.len() == hp.depth
            && self
                .passes
                .iter()
                .all(|d| d.in_dim == hp.hidden && d.out_dim == hp.hidden)
            && self.mlp.len() == widths.len() - 1
            && self
                .mlp
                .iter()
                .zip(widths.windows(2))
                .all(|(d, w)| d.in_dim == w[0] && d.out_dim == w[1])
    }
}

/// Exact number of scalar learnables.
pub fn param_count(params: &ModelParams) -> usize {
    params.embed.len()
        + params.passes.iter().map(Dense::len).sum::<usize>()
        + params.mlp.iter().map(Dense::len).sum::<usize>()
}

/// Glorot-uniform weights, zero biases; deterministic per seed (tensors are
/// drawn in declaration order).
pub fn init_params(hp: &Hyperparams, seed: u64) -> Result<ModelParams> {
    hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embed = Dense::glorot(hp.hop_order, hp.hidden, &mut rng);
    let passes = (0..hp.depth)
        .map(|_| Dense::glorot(hp.hidden, hp.hidden, &mut rng))
        .collect();
    let widths = hp.mlp_widths();
    let mlp = widths
        .windows(2)
        .map(|w| Dense::glorot(w[0], w[1], &mut rng))
        .collect();
    Ok(ModelParams { embed, passes, mlp })
}

/// Train mode draws fresh dropout masks from the supplied generator; eval
/// mode is pure and deterministic.
pub enum Mode<'a> {
    Train { dropout_rng: &'a mut ChaCha8Rng },
    Eval,
}

/// Per-column max normalization. Degree masses grow multiplicatively with
/// graph size; dividing each column by its per-graph maximum is
/// rank-preserving and keeps the features size-invariant. Zero columns stay
/// zero.
pub(crate) fn normalize_features(masses: &DegreeMassMatrix) -> Mat {
    let n = masses.node_count();
    let m = masses.order();
    let mut max_per_column = vec![0.0f64; m];
    for u in 0..n {
        for (j, &v) in masses.row(u).iter().enumerate() {
            if v > max_per_column[j] {
                max_per_column[j] = v;
            }
        }
    }
    let mut out = Mat::zeros(n, m);
    for u in 0..n {
        let row = out.row_mut(u);
        for (j, &v) in masses.row(u).iter().enumerate() {
            if max_per_column[j] > 0.0 {
                row[j] = v / max_per_column[j];
            }
        }
    }
    out
}

/// Embedding: normalized degree-mass features through the dense layer with
/// ReLU. Output is `n x hidden`.
pub fn embed(masses: &DegreeMassMatrix, params: &ModelParams) -> Result<Vec<f64>> {
    if masses.order() != params.embed.in_dim {
        return Err(Error::Contract(format!(
            "feature column count {} does not match embedding input {}",
            masses.order(),
            params.embed.in_dim
        )));
    }
    Ok(embed_mat(masses, params).1.data)
}

fn embed_mat(masses: &DegreeMassMatrix, params: &ModelParams) -> (Mat, Mat) {
    let features = normalize_features(masses);
    let pre = params.embed.apply(&features);
    let post = relu(&pre);
    (pre, post)
}

pub(crate) struct MlpCache {
    /// Input of each linear layer (post-dropout for hidden activations).
    pub inputs: Vec<Mat>,
    /// Pre-activation output of each linear layer.
    pub pre: Vec<Mat>,
    /// Inverted-dropout multipliers per hidden layer (train mode only).
    pub masks: Vec<Option<Vec<f64>>>,
}

fn mlp_forward(
    x: &Mat,
    mlp: &[Dense],
    dropout: f64,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> (Vec<f64>, MlpCache) {
    let mut inputs = vec![x.clone()];
    let mut pre = Vec::with_capacity(mlp.len());
    let mut masks = Vec::with_capacity(mlp.len().saturating_sub(1));
    for (idx, layer) in mlp.iter().enumerate() {
        let z = layer.apply(inputs.last().expect("nonempty"));
        pre.push(z);
        if idx + 1 == mlp.len() {
            break;
        }
        let mut activated = relu(pre.last().expect("just pushed"));
        let mask = match rng {
            Some(rng) if dropout > 0.0 => {
                let keep = 1.0 - dropout;
                let mask: Vec<f64> = (0..activated.data.len())
                    .map(|_| if rng.gen::<f64>() < dropout { 0.0 } else { 1.0 / keep })
                    .collect();
                for (v, &m) in activated.data.iter_mut().zip(&mask) {
                    *v *= m;
                }
                Some(mask)
            }
            _ => None,
        };
        masks.push(mask);
        inputs.push(activated);
    }
    let scores = pre.last().expect("mlp has at least one layer").data.clone();
    (scores, MlpCache { inputs, pre, masks })
}

pub(crate) struct LayerTrace {
    /// Aggregated neighbor features `A H`.
    pub aggregated: Mat,
    /// Pre-activation `A H W + b`.
    pub pre: Mat,
    /// Post-ReLU, pre-normalization.
    pub activated: Mat,
    /// Post-normalization hidden state fed to the next layer.
    pub hidden: Mat,
    pub mlp: MlpCache,
}

pub(crate) struct DirectionTrace {
    pub embed_pre: Mat,
    pub layers: Vec<LayerTrace>,
    /// MLP cache when scoring the raw embedding (`depth == 0` fallback).
    pub embed_mlp: Option<MlpCache>,
    pub y: Vec<f64>,
}

/// Everything the forward pass computed, kept for inspection and backprop.
pub struct ForwardTrace {
    pub(crate) incoming: DirectionTrace,
    pub(crate) outgoing: DirectionTrace,
    scores: Vec<f64>,
}

impl ForwardTrace {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn y_in(&self) -> &[f64] {
        &self.incoming.y
    }

    pub fn y_out(&self) -> &[f64] {
        &self.outgoing.y
    }

    /// L2 norms of the post-normalization hidden rows, all layers and both
    /// directions; unit for every nonzero row.
    pub fn hidden_row_norms(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for direction in [&self.incoming, &self.outgoing] {
            for layer in &direction.layers {
                for i in 0..layer.hidden.rows {
                    let norm = layer.hidden.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                    out.push(norm);
                }
            }
        }
        out
    }
}

fn run_direction(
    adjacency: &Graph,
    masses: &DegreeMassMatrix,
    params: &ModelParams,
    hp: &Hyperparams,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> DirectionTrace {
    let n = adjacency.node_count();
    let (embed_pre, h0) = embed_mat(masses, params);
    let mut y = vec![0.0; n];
    let mut layers = Vec::with_capacity(hp.depth);
    let mut current = h0.clone();
    for layer_params in &params.passes {
        let aggregated = spmv_rows(adjacency, &current);
        let pre = layer_params.apply(&aggregated);
        let activated = relu(&pre);
        let hidden = row_l2_normalize(&activated);
        let (scores, mlp) = mlp_forward(&hidden, &params.mlp, hp.dropout, rng);
        for (acc, s) in y.iter_mut().zip(&scores) {
            *acc += s;
        }
        current = hidden.clone();
        layers.push(LayerTrace {
            aggregated,
            pre,
            activated,
            hidden,
            mlp,
        });
    }
    let mut embed_mlp = None;
    if hp.depth == 0 && hp.zero_layer_mlp {
        let (scores, mlp) = mlp_forward(&h0, &params.mlp, hp.dropout, rng);
        y = scores;
        embed_mlp = Some(mlp);
    }
    DirectionTrace {
        embed_pre,
        layers,
        embed_mlp,
        y,
    }
}

/// Full forward pass with precomputed degree masses (`masses_in` from the
/// graph as stored, `masses_out` from its transpose). The incoming direction
/// aggregates over `A`, the outgoing one over `A^T`, with shared weights.
pub fn forward_with_masses(
    g: &Graph,
    masses_in: &DegreeMassMatrix,
    masses_out: &DegreeMassMatrix,
    params: &ModelParams,
    hp: &Hyperparams,
    mode: Mode<'_>,
) -> Result<ForwardTrace> {
    hp.validate()?;
    if !params.matches(hp) {
        return Err(Error::Contract(
            "model parameters do not match the hyperparameters".into(),
        ));
    }
    if masses_in.node_count() != g.node_count() || masses_out.node_count() != g.node_count() {
        return Err(Error::Contract("degree-mass row count mismatch".into()));
    }
    if masses_in.order() != hp.hop_order || masses_out.order() != hp.hop_order {
        return Err(Error::Contract("degree-mass hop order mismatch".into()));
    }
    let mut rng = match mode {
        Mode::Train { dropout_rng } => Some(dropout_rng),
        Mode::Eval => None,
    };
    let incoming = run_direction(g, masses_in, params, hp, &mut rng);
    let outgoing = run_direction(g.transpose(), masses_out, params, hp, &mut rng);
    let scores = incoming
        .y
        .iter()
        .zip(&outgoing.y)
        .map(|(a, b)| a * b)
        .collect();
    Ok(ForwardTrace {
        incoming,
        outgoing,
        scores,
    })
}

/// Convenience wrapper computing the degree masses internally.
pub fn forward(
    g: &Graph,
    params: &ModelParams,
    hp: &Hyperparams,
    mode: Mode<'_>,
) -> Result<Vec<f64>> {
    let masses_in = crate::centrality::degree_mass(g, hp.hop_order);
    let masses_out = crate::centrality::degree_mass(g.transpose(), hp.hop_order);
    Ok(forward_with_masses(g, &masses_in, &masses_out, params, hp, mode)?
        .scores()
        .to_vec())
}

#[derive(Serialize, Deserialize)]
struct TensorDump {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// On-disk model representation: version, hyperparameters, and every tensor
/// in row-major order with explicit shapes.
#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    version: u32,
    hyperparams: Hyperparams,
    tensors: Vec<TensorDump>,
}

const MODEL_FORMAT_VERSION: u32 = 1;

fn dump_tensors(params: &ModelParams) -> Vec<TensorDump> {
    let mut tensors = Vec::new();
    let mut push = |name: &str, dense: &Dense| {
        tensors.push(TensorDump {
            name: format!("{name}.weight"),
            shape: vec![dense.in_dim, dense.out_dim],
            data: dense.weight.clone(),
        });
        tensors.push(TensorDump {
            name: format!("{name}.bias"),
            shape: vec![dense.out_dim],
            data: dense.bias.clone(),
        });
    };
    push("embed", &params.embed);
    for (l, dense) in params.passes.iter().enumerate() {
        push(&format!("pass{l}"), dense);
    }
    for (l, dense) in params.mlp.iter().enumerate() {
        push(&format!("mlp{l}"), dense);
    }
    tensors
}

pub fn to_model_file(hp: &Hyperparams, params: &ModelParams) -> ModelFile {
    ModelFile {
        version: MODEL_FORMAT_VERSION,
        hyperparams: hp.clone(),
        tensors: dump_tensors(params),
    }
}

/// Validate a parsed model file and rebuild the parameters; every tensor
/// name and shape must match what the stored hyperparameters imply.
pub fn from_model_file(file: &ModelFile) -> Result<(Hyperparams, ModelParams)> {
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported model format version {}",
            file.version
        )));
    }
    let hp = file.hyperparams.clone();
    hp.validate()?;
    let mut params = init_params(&hp, 0)?.zeros_like();
    let expected: Vec<(String, Vec<usize>)> = dump_tensors(&params)
        .into_iter()
        .map(|t| (t.name, t.shape))
        .collect();
    if expected.len() != file.tensors.len() {
        return Err(Error::Config(format!(
            "model file has {} tensors, expected {}",
            file.tensors.len(),
            expected.len()
        )));
    }
    {
        let mut slots = params.tensors_mut();
        for (slot, (dump, (name, shape))) in
            slots.iter_mut().zip(file.tensors.iter().zip(&expected))
        {
            if dump.name != *name || dump.shape != *shape {
                return Err(Error::Config(format!(
                    "tensor mismatch: got {} {:?}, expected {} {:?}",
                    dump.name, dump.shape, name, shape
                )));
            }
            if dump.data.len() != slot.len() {
                return Err(Error::Config(format!(
                    "tensor {} has {} values, expected {}",
                    dump.name,
                    dump.data.len(),
                    slot.len()
                )));
            }
            slot.copy_from_slice(&dump.data);
        }
    }
    Ok((hp, params))
}

/// Serialize hyperparameters plus all tensors (row-major, explicit shapes)
/// as versioned JSON.
pub fn save_model<P: AsRef<std::path::Path>>(
    path: P,
    hp: &Hyperparams,
    params: &ModelParams,
) -> Result<()> {
    let json = serde_json::to_string(&to_model_file(hp, params))
        .map_err(|e| Error::Contract(format!("model serialization failed: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Load a model file, validating shapes and the parameter layout implied by
/// the stored hyperparameters.
pub fn load_model<P: AsRef<std::path::Path>>(path: P) -> Result<(Hyperparams, ModelParams)> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("invalid model file: {e}"),
    })?;
    from_model_file(&file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centrality::degree_mass;
    use crate::graph::{build_graph, EdgeList};
    use crate::testutil::random_graph;

    #[test]
    fn default_parameter_count_is_1333() {
        let params = init_params(&Hyperparams::default(), 0).unwrap();
        assert_eq!(param_count(&params), 1333);
    }

    #[test]
    fn four_layer_mlp_reading_would_give_1621() {
        // The rejected wider-MLP reading; kept as arithmetic documentation.
        let hp = Hyperparams {
            mlp_hidden: vec![24, 24, 12],
            ..Hyperparams::default()
        };
        let params = init_params(&hp, 0).unwrap();
        assert_eq!(param_count(&params), 1621);
    }

    #[test]
    fn parameter_count_formula_for_other_widths() {
        let hp = Hyperparams {
            hidden: 8,
            ..Hyperparams::default()
        };
        let params = init_params(&hp, 0).unwrap();
        let (m, h, l) = (6, 8, 2);
        let mlp = h * 24 + 24 + 24 * 24 + 24 + 24 + 1;
        assert_eq!(param_count(&params), m * h + h + l * (h * h + h) + mlp);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = init_params(&Hyperparams::default(), 42).unwrap();
        let b = init_params(&Hyperparams::default(), 42).unwrap();
        assert_eq!(a, b);
        assert!(a.embed.bias.iter().all(|&v| v == 0.0));
        assert!(a.mlp.iter().all(|d| d.bias.iter().all(|&v| v == 0.0)));
        let c = init_params(&Hyperparams::default(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_weights_give_zero_embedding() {
        let hp = Hyperparams::default();
        let params = init_params(&hp, 0).unwrap().zeros_like();
        let g = build_graph(&EdgeList::new(vec![(0, 1), (1, 2)], false));
        let embedding = embed(&degree_mass(&g, hp.hop_order), &params).unwrap();
        assert!(embedding.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embedding_of_isolated_nodes_is_relu_of_bias() {
        let hp = Hyperparams::default();
        let mut params = init_params(&hp, 0).unwrap();
        for (i, b) in params.embed.bias.iter_mut().enumerate() {
            *b = i as f64 - 5.0; // mixed signs
        }
        // Single node whose only edge is a dropped self-loop: all masses 0.
        let g = build_graph(&EdgeList::new(vec![(3, 3)], false));
        let embedding = embed(&degree_mass(&g, hp.hop_order), &params).unwrap();
        let expected: Vec<f64> = params.embed.bias.iter().map(|&b| b.max(0.0)).collect();
        assert_eq!(embedding, expected);
    }

    #[test]
    fn embedding_ignores_uniform_feature_scaling() {
        let hp = Hyperparams::default();
        let params = init_params(&hp, 7).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = random_graph(&mut rng, 10, 0.4, false);
        let masses = degree_mass(&g, hp.hop_order);
        let scaled = masses.scaled(10.0);
        let a = embed(&masses, &params).unwrap();
        let b = embed(&scaled, &params).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    fn eval_scores(g: &Graph, params: &ModelParams, hp: &Hyperparams) -> ForwardTrace {
        let masses_in = degree_mass(g, hp.hop_order);
        let masses_out = degree_mass(g.transpose(), hp.hop_order);
        forward_with_masses(g, &masses_in, &masses_out, params, hp, Mode::Eval).unwrap()
    }

    #[test]
    fn undirected_graphs_have_symmetric_directions() {
        let hp = Hyperparams::default();
        let params = init_params(&hp, 11).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = random_graph(&mut rng, 25, 0.2, false);
        let trace = eval_scores(&g, &params, &hp);
        for (a, b) in trace.y_in().iter().zip(trace.y_out()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(trace.scores().iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let hp = Hyperparams::default();
        let params = init_params(&hp, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let g = random_graph(&mut rng, 20, 0.3, true);
        let a = eval_scores(&g, &params, &hp);
        let b = eval_scores(&g, &params, &hp);
        assert_eq!(a.scores(), b.scores());
    }

    #[test]
    fn hidden_rows_are_unit_norm_after_normalization() {
        let hp = Hyperparams::default();
        let params = init_params(&hp, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let g = random_graph(&mut rng, 30, 0.2, true);
        let trace = eval_scores(&g, &params, &hp);
        for norm in trace.hidden_row_norms() {
            assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12, "norm {norm}");
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn forward_is_permutation_equivariant() {
        let hp = Hyperparams::default();
        let params = init_params(&hp, 19).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let g = random_graph(&mut rng, 15, 0.3, true);
        let n = g.node_count() as u64;
        let perm: Vec<u64> = (0..n).map(|v| (7 * v + 2) % n).collect();
        let mut edges = Vec::new();
        for u in 0..g.node_count() {
            for &v in g.neighbors(u) {
                edges.push((perm[u], perm[v as usize]));
            }
        }
        let relabeled = build_graph(&EdgeList::new(edges, true));
        let base = eval_scores(&g, &params, &hp);
        let mapped = eval_scores(&relabeled, &params, &hp);
        for u in 0..g.node_count() {
            let new_index = relabeled
                .original_ids()
                .iter()
                .position(|&id| id == perm[u])
                .unwrap();
            let (a, b) = (base.scores()[u], mapped.scores()[new_index]);
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn zero_depth_without_fallback_scores_zero() {
        let hp = Hyperparams {
            depth: 0,
            ..Hyperparams::default()
        };
        let params = init_params(&hp, 1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let g = random_graph(&mut rng, 12, 0.3, false);
        let trace = eval_scores(&g, &params, &hp);
        assert!(trace.scores().iter().all(|&s| s == 0.0));

        let hp_fallback = Hyperparams {
            zero_layer_mlp: true,
            ..hp
        };
        let params = init_params(&hp_fallback, 1).unwrap();
        let trace = eval_scores(&g, &params, &hp_fallback);
        assert!(trace.scores().iter().any(|&s| s != 0.0));
    }

    #[test]
    fn model_file_round_trip_is_exact() {
        let dir = std::env::temp_dir().join(format!("brava-model-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        let hp = Hyperparams::default();
        let params = init_params(&hp, 77).unwrap();
        save_model(&path, &hp, &params).unwrap();
        let (loaded_hp, loaded_params) = load_model(&path).unwrap();
        assert_eq!(loaded_hp, hp);
        assert_eq!(loaded_params, params);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn load_rejects_shape_mismatch() {
        let dir = std::env::temp_dir().join(format!("brava-model-test2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        let hp = Hyperparams::default();
        let params = init_params(&hp, 1).unwrap();
        save_model(&path, &hp, &params).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        // Claim a different hop order than the stored tensors.
        text = text.replace("\"hop_order\":6", "\"hop_order\":5");
        std::fs::write(&path, text).unwrap();
        assert!(load_model(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
