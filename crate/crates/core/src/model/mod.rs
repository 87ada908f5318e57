//! Core-membership predictor: a graph convolution network over the literal
//! graph with a per-variable MLP head, trained with hand-derived gradients.
//!
//! The module is split into the dense linear algebra ([`mat`]), the network
//! math ([`net`]), checkpoint I/O ([`checkpoint`]), and the finite-difference
//! gradient audit ([`gradcheck`]). Everything is f64; instances are small
//! enough that fidelity beats speed.

pub mod checkpoint;
pub mod gradcheck;
pub mod mat;
pub mod net;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::Cnf;
use crate::graph::{
    build_lcg, build_wlig, normalize_adjacency_with, normalize_counts, raw_node_features_with, Csr,
    DegreeMode, GraphError, NormMode,
};
use crate::solver::{seed_from_prediction, BranchSeed};
use mat::Mat;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {detail}")]
    InvalidConfig { detail: String },
    #[error("non-finite values in tensor '{tensor}'")]
    NumericalOverflow { tensor: String },
    #[error("label vector has length {got}, expected {expected}")]
    LabelLength { expected: usize, got: usize },
    #[error("flip needs an even row count, got {rows}")]
    OddRowCount { rows: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Focal,
    CrossEntropy,
    Kl,
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "focal" => Ok(LossKind::Focal),
            "cross_entropy" | "ce" => Ok(LossKind::CrossEntropy),
            "kl" => Ok(LossKind::Kl),
            other => Err(format!("unknown loss '{other}' (focal|cross_entropy|kl)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Per-variable core membership (the main supervision signal).
    #[default]
    Core,
    /// Single graph-level UNSAT label via mean-pooled logits (ablation).
    Satisfiability,
}

impl std::str::FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "core" => Ok(TargetKind::Core),
            "satisfiability" | "sat" => Ok(TargetKind::Satisfiability),
            other => Err(format!("unknown target '{other}' (core|satisfiability)")),
        }
    }
}

/// How the head pairs literal rows per variable. `Half` pairs x_i with
/// ¬x_i (rows i and n+i); `Mirror` pairs row i with row 2n-1-i.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    #[default]
    Half,
    Mirror,
}

impl std::str::FromStr for Pairing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "half" => Ok(Pairing::Half),
            "mirror" => Ok(Pairing::Mirror),
            other => Err(format!("unknown pairing '{other}' (half|mirror)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    /// Weighted literal-incidence graph (the main encoding).
    #[default]
    Wlig,
    /// Bipartite literal-clause graph (ablation).
    Lcg,
}

impl std::str::FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wlig" => Ok(GraphKind::Wlig),
            "lcg" => Ok(GraphKind::Lcg),
            other => Err(format!("unknown graph kind '{other}' (wlig|lcg)")),
        }
    }
}

/// Architecture and training hyperparameters. Serialized into checkpoints,
/// so loading a model restores the exact configuration it was built with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Embedding half-width; node states are 2d wide.
    pub d: usize,
    /// Number of graph-convolution iterations.
    #[serde(alias = "l")]
    pub iterations: usize,
    /// MLP head hidden width.
    pub hidden: usize,
    /// One convolution map reused across iterations vs one per iteration.
    pub shared_weights: bool,
    /// Focal loss class weight on the core class.
    pub alpha: f64,
    /// Focal loss focusing exponent.
    pub gamma: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss_kind: LossKind,
    pub target_kind: TargetKind,
    pub pairing: Pairing,
    pub graph_kind: GraphKind,
    pub degree_mode: DegreeMode,
    pub norm_mode: NormMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 32,
            iterations: 3,
            hidden: 64,
            shared_weights: false,
            alpha: 0.25,
            gamma: 2.0,
            lr: 1e-3,
            epochs: 50,
            batch_size: 16,
            seed: 0,
            loss_kind: LossKind::Focal,
            target_kind: TargetKind::Core,
            pairing: Pairing::Half,
            graph_kind: GraphKind::Wlig,
            degree_mode: DegreeMode::Weighted,
            norm_mode: NormMode::GlobalSum,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |detail: String| Err(ModelError::InvalidConfig { detail });
        if self.d < 1 {
            return fail(format!("d must be >= 1, got {}", self.d));
        }
        if self.iterations < 1 {
            return fail(format!("iterations must be >= 1, got {}", self.iterations));
        }
        if self.hidden < 1 {
            return fail(format!("hidden must be >= 1, got {}", self.hidden));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must be in (0,1), got {}", self.alpha));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return fail(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        // lr = 0 is allowed: it runs the full loop with frozen parameters,
        // which is useful as a control arm.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if self.batch_size < 1 {
            return fail(format!("batch_size must be >= 1, got {}", self.batch_size));
        }
        Ok(())
    }
}

/// All learnable tensors. `w_out` holds one matrix per iteration, or a
/// single shared one; `w_out_for` hides the difference.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// 2 x 2d embedding map.
    pub w_init: Mat,
    pub b_init: Vec<f64>,
    /// 4d x 2d convolution maps.
    pub w_out: Vec<Mat>,
    pub b_out: Vec<Vec<f64>>,
    /// 4d x hidden head layer.
    pub w1: Mat,
    pub b1: Vec<f64>,
    /// hidden x 2 logit layer.
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> ModelParams {
        let two_d = 2 * cfg.d;
        let four_d = 4 * cfg.d;
        let maps = if cfg.shared_weights {
            1
        } else {
            cfg.iterations
        };
        ModelParams {
            w_init: Mat::zeros(2, two_d),
            b_init: vec![0.0; two_d],
            w_out: (0..maps).map(|_| Mat::zeros(four_d, two_d)).collect(),
            b_out: vec![vec![0.0; two_d]; maps],
            w1: Mat::zeros(four_d, cfg.hidden),
            b1: vec![0.0; cfg.hidden],
            w2: Mat::zeros(cfg.hidden, 2),
            b2: vec![0.0; 2],
        }
    }

    pub fn zeros_like(p: &ModelParams) -> ModelParams {
        ModelParams {
            w_init: Mat::zeros(p.w_init.rows(), p.w_init.cols()),
            b_init: vec![0.0; p.b_init.len()],
            w_out: p
                .w_out
                .iter()
                .map(|w| Mat::zeros(w.rows(), w.cols()))
                .collect(),
            b_out: p.b_out.iter().map(|b| vec![0.0; b.len()]).collect(),
            w1: Mat::zeros(p.w1.rows(), p.w1.cols()),
            b1: vec![0.0; p.b1.len()],
            w2: Mat::zeros(p.w2.rows(), p.w2.cols()),
            b2: vec![0.0; p.b2.len()],
        }
    }

    pub fn glorot(cfg: &ModelConfig, seed: u64) -> ModelParams {
        init_params(cfg, seed)
    }

    /// Convolution map for iteration `l` (shared maps ignore `l`).
    pub fn w_out_for(&self, l: usize) -> (&Mat, &[f64]) {
        let idx = if self.w_out.len() == 1 { 0 } else { l };
        (&self.w_out[idx], &self.b_out[idx])
    }

    pub fn w_out_for_mut(&mut self, l: usize) -> (&mut Mat, &mut Vec<f64>) {
        let idx = if self.w_out.len() == 1 { 0 } else { l };
        (&mut self.w_out[idx], &mut self.b_out[idx])
    }

    /// Tensors in the fixed serialization order, with shapes. This order
    /// defines the flat layout and the checkpoint layout.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
        out.push((
            "w_init".into(),
            vec![self.w_init.rows(), self.w_init.cols()],
            self.w_init.data(),
        ));
        out.push(("b_init".into(), vec![self.b_init.len()], &self.b_init));
        for (i, (w, b)) in self.w_out.iter().zip(&self.b_out).enumerate() {
            out.push((format!("w_out.{i}"), vec![w.rows(), w.cols()], w.data()));
            out.push((format!("b_out.{i}"), vec![b.len()], b));
        }
        out.push((
            "w1".into(),
            vec![self.w1.rows(), self.w1.cols()],
            self.w1.data(),
        ));
        out.push(("b1".into(), vec![self.b1.len()], &self.b1));
        out.push((
            "w2".into(),
            vec![self.w2.rows(), self.w2.cols()],
            self.w2.data(),
        ));
        out.push(("b2".into(), vec![self.b2.len()], &self.b2));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        out.push(("w_init".into(), self.w_init.data_mut()));
        out.push(("b_init".into(), &mut self.b_init));
        for (i, (w, b)) in self.w_out.iter_mut().zip(&mut self.b_out).enumerate() {
            out.push((format!("w_out.{i}"), w.data_mut()));
            out.push((format!("b_out.{i}"), b));
        }
        out.push(("w1".into(), self.w1.data_mut()));
        out.push(("b1".into(), &mut self.b1));
        out.push(("w2".into(), self.w2.data_mut()));
        out.push(("b2".into(), &mut self.b2));
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, _, d)| d.len()).sum()
    }

    /// Flattened view in `named_tensors` order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (_, _, data) in self.named_tensors() {
            out.extend_from_slice(data);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for (_, data) in self.tensors_mut() {
            data.copy_from_slice(&flat[offset..offset + data.len()]);
            offset += data.len();
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    /// Tensor name and in-tensor offset owning flat index `i`.
    pub fn locate_flat(&self, mut i: usize) -> (String, usize) {
        for (name, _, data) in self.named_tensors() {
            if i < data.len() {
                return (name, i);
            }
            i -= data.len();
        }
        panic!("flat index out of range");
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        let flat = other.flat();
        let mut offset = 0;
        for (_, data) in self.tensors_mut() {
            for v in data.iter_mut() {
                *v += flat[offset];
                offset += 1;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, data) in self.tensors_mut() {
            for v in data {
                *v *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors()
            .iter()
            .all(|(_, _, d)| d.iter().all(|v| v.is_finite()))
    }
}

/// Glorot-uniform weights, zero biases. Deterministic: the draw order is
/// the `named_tensors` order, row-major within each matrix.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(cfg);
    let mut fill = |m: &mut Mat| {
        let bound = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
        for v in m.data_mut() {
            *v = rng.random_range(-bound..bound);
        }
    };
    fill(&mut params.w_init);
    for w in &mut params.w_out {
        fill(w);
    }
    fill(&mut params.w1);
    fill(&mut params.w2);
    params
}

/// Per-variable probability of core membership, from a 2-way softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: Vec<f64>,
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Decision-queue seed: scores are the probabilities, order is by
    /// descending probability.
    pub fn branch_seed(&self) -> BranchSeed {
        seed_from_prediction(&self.probs)
    }
}

/// A CNF encoded for the network: normalized adjacency, raw node features,
/// the complement-literal permutation, and the head's row pairs.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub adj: Csr<f64>,
    pub features: Vec<(f64, f64)>,
    /// Node permutation swapping each literal with its complement; identity
    /// on clause nodes. Always an involution.
    pub flip: Vec<u32>,
    /// Row pair (positive side, paired side) per variable, in variable order.
    pub head_pairs: Vec<(u32, u32)>,
    pub n_vars: u32,
}

impl GraphInput {
    pub fn from_cnf(cnf: &Cnf, cfg: &ModelConfig) -> Result<GraphInput, ModelError> {
        let n = cnf.num_vars() as usize;
        let (adj, features) = match cfg.graph_kind {
            GraphKind::Wlig => {
                let g = build_wlig(cnf);
                let norm = normalize_adjacency_with(&g, cfg.norm_mode, false)?;
                (norm.adjacency, raw_node_features_with(&g, cfg.degree_mode))
            }
            GraphKind::Lcg => {
                let g = build_lcg(cnf);
                let adj = normalize_counts(&g.adjacency, cfg.norm_mode, false)?;
                let features = (0..g.num_nodes())
                    .map(|i| {
                        let (cols, weights) = g.adjacency.row(i);
                        let deg = match cfg.degree_mode {
                            DegreeMode::Weighted => weights.iter().map(|&w| w as f64).sum::<f64>(),
                            DegreeMode::Simple => cols.len() as f64,
                        };
                        let kind = if i < n {
                            1.0
                        } else if i < 2 * n {
                            -1.0
                        } else {
                            0.0
                        };
                        (deg, kind)
                    })
                    .collect();
                (adj, features)
            }
        };
        let num_nodes = features.len();
        let mut flip: Vec<u32> = (0..num_nodes as u32).collect();
        for v in 0..n {
            flip[v] = (v + n) as u32;
            flip[v + n] = v as u32;
        }
        debug_assert!((0..num_nodes).all(|i| flip[flip[i] as usize] as usize == i));
        let head_pairs = (0..n as u32)
            .map(|v| match cfg.pairing {
                Pairing::Half => (v, v + n as u32),
                Pairing::Mirror => (v, (2 * n) as u32 - 1 - v),
            })
            .collect();
        Ok(GraphInput {
            adj,
            features,
            flip,
            head_pairs,
            n_vars: cnf.num_vars(),
        })
    }
}

/// One labeled training instance, already encoded.
#[derive(Clone, Debug)]
pub struct TrainExample {
    pub name: String,
    pub input: GraphInput,
    /// Per-variable core membership; ignored by the satisfiability target.
    pub core_labels: Vec<bool>,
    /// Graph-level label for the satisfiability target.
    pub unsat: bool,
}

impl TrainExample {
    pub fn new(
        name: impl Into<String>,
        input: GraphInput,
        core_labels: Vec<bool>,
        unsat: bool,
    ) -> Result<TrainExample, ModelError> {
        if core_labels.len() != input.n_vars as usize {
            return Err(ModelError::LabelLength {
                expected: input.n_vars as usize,
                got: core_labels.len(),
            });
        }
        Ok(TrainExample {
            name: name.into(),
            input,
            core_labels,
            unsat,
        })
    }

    pub fn from_cnf(
        name: impl Into<String>,
        cnf: &Cnf,
        core_labels: Vec<bool>,
        unsat: bool,
        cfg: &ModelConfig,
    ) -> Result<TrainExample, ModelError> {
        let input = GraphInput::from_cnf(cnf, cfg)?;
        TrainExample::new(name, input, core_labels, unsat)
    }
}

/// Wall-clock breakdown of a prediction; total is the paper-facing number.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PredictTiming {
    pub graph_ms: f64,
    pub inference_ms: f64,
}

impl PredictTiming {
    pub fn total_ms(&self) -> f64 {
        self.graph_ms + self.inference_ms
    }
}

/// Run the network on one CNF. An edgeless graph (nothing for the
/// convolution to propagate over) falls back to uniform 0.5, logged.
pub fn predict(
    params: &ModelParams,
    cfg: &ModelConfig,
    cnf: &Cnf,
) -> Result<Prediction, ModelError> {
    predict_timed(params, cfg, cnf).map(|(p, _)| p)
}

pub fn predict_timed(
    params: &ModelParams,
    cfg: &ModelConfig,
    cnf: &Cnf,
) -> Result<(Prediction, PredictTiming), ModelError> {
    let start = Instant::now();
    let input = match GraphInput::from_cnf(cnf, cfg) {
        Ok(input) => input,
        Err(ModelError::Graph(GraphError::EdgelessGraph)) => {
            log::warn!(
                "edgeless graph for '{}': falling back to uniform 0.5",
                cnf.name()
            );
            let timing = PredictTiming {
                graph_ms: start.elapsed().as_secs_f64() * 1e3,
                inference_ms: 0.0,
            };
            let probs = vec![0.5; cnf.num_vars() as usize];
            return Ok((Prediction { probs }, timing));
        }
        Err(e) => return Err(e),
    };
    let graph_ms = start.elapsed().as_secs_f64() * 1e3;
    let infer_start = Instant::now();
    let cache = net::forward(params, &input, cfg)?;
    let probs = cache
        .probs
        .iter()
        .map(|p| p.clamp(net::PROB_EPS, 1.0 - net::PROB_EPS))
        .collect();
    let timing = PredictTiming {
        graph_ms,
        inference_ms: infer_start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((Prediction { probs }, timing))
}

/// Loss of one instance under the configured target, no gradients.
pub fn instance_loss(
    params: &ModelParams,
    ex: &TrainExample,
    cfg: &ModelConfig,
) -> Result<f64, ModelError> {
    let cache = net::forward(params, &ex.input, cfg)?;
    let (loss, _) = match cfg.target_kind {
        TargetKind::Core => net::loss_by_kind(
            cfg.loss_kind,
            &cache.probs,
            &ex.core_labels,
            cfg.alpha,
            cfg.gamma,
        )?,
        TargetKind::Satisfiability => {
            let (_, p) = cache.pooled.expect("pooled state present");
            net::loss_by_kind(cfg.loss_kind, &[p], &[ex.unsat], cfg.alpha, cfg.gamma)?
        }
    };
    Ok(loss)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean per-instance loss over the epoch's batches.
    pub train_loss: f64,
    /// Mean per-instance loss on the validation set after the epoch.
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned; 0 means the initial ones.
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(len: usize, lr: f64) -> Adam {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch Adam over per-instance losses (batch mean of per-instance
/// sums). Deterministic given `cfg.seed`: initialization, shuffle order,
/// and accumulation order are all fixed. Returns the parameters of the
/// best-validation-loss epoch, or best-train-loss when no validation set
/// is given.
pub fn train(
    train_set: &[TrainExample],
    val_set: Option<&[TrainExample]>,
    cfg: &ModelConfig,
) -> Result<(ModelParams, TrainHistory), ModelError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if cfg.target_kind == TargetKind::Core
        && train_set
            .iter()
            .all(|ex| ex.core_labels.iter().all(|&y| !y))
    {
        log::warn!(
            "training set has zero positive core labels; the positive arm of the loss never fires"
        );
    }

    let mut params = init_params(cfg, cfg.seed);
    let mut best = params.clone();
    let mut best_score = f64::INFINITY;
    let mut history = TrainHistory::default();
    let mut adam = Adam::new(params.num_params(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        // Fisher-Yates, hand-rolled so the shuffle sequence is pinned by
        // this code rather than by a rand crate implementation detail.
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut grads = ModelParams::zeros_like(&params);
            for &idx in chunk {
                let ex = &train_set[idx];
                let (loss, g) =
                    net::forward_backward(&params, &ex.input, &ex.core_labels, ex.unsat, cfg)?;
                epoch_loss += loss;
                grads.add_assign(&g);
            }
            grads.scale(1.0 / chunk.len() as f64);
            let mut theta = params.flat();
            adam.step(&mut theta, &grads.flat());
            params.set_flat(&theta);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = match val_set {
            Some(val) if !val.is_empty() => {
                let mut total = 0.0;
                for ex in val {
                    total += instance_loss(&params, ex, cfg)?;
                }
                Some(total / val.len() as f64)
            }
            _ => None,
        };
        let score = val_loss.unwrap_or(train_loss);
        if score < best_score {
            best_score = score;
            best = params.clone();
            history.best_epoch = epoch;
        }
        match val_loss {
            Some(v) => log::info!("epoch {epoch}: train loss {train_loss:.6}, val loss {v:.6}"),
            None => log::info!("epoch {epoch}: train loss {train_loss:.6}"),
        }
        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
    }
    Ok((best, history))
}
