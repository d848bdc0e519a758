//! Q-function approximators for the five highway actions, with hand-written
//! reverse-mode gradients, the Adam optimiser, prioritised replay and the
//! DQN training loop.
//!
//! Two model kinds share one parameter layout (a list of dense layers):
//!
//! * [`GcnModel`]: three graph-convolution layers over the proximity graph of
//!   the observed vehicles; Q-values are read from the ego node.
//! * [`MlpModel`]: the flattened observation through three dense layers.

mod adam;
mod checkpoint;
mod encoding;
mod gcn;
mod mlp;
mod replay;
mod train;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_update, Adam, AdamConfig};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use encoding::InputEncoding;
pub use gcn::{adjacency_from_observation, gcn_forward, normalize_adjacency, GcnModel};
pub use mlp::{mlp_forward, MlpModel};
pub use replay::{ReplayBuffer, ReplayError, Sample, SumTree, Transition};
pub use train::{
    argmax, epsilon_greedy, greedy_episode, least_squares_slope, td_gradients, td_loss, train, train_with_hooks,
    EpisodeRecord, TdLoss, TrainConfig, TrainError, TrainHooks, TrainOutcome,
};

use crate::env::{Observation, ACTION_COUNT};

pub type QValues = [f64; ACTION_COUNT];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gcn,
    Mlp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gcn" => Ok(ModelKind::Gcn),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(format!("unknown model kind {other:?}, expected gcn or mlp")),
        }
    }
}

/// `y = x·W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { w: Array2::zeros((inputs, outputs)), b: Array1::zeros(outputs) }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((inputs, outputs), || rng.random_range(-limit..limit));
        Self { w, b: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.inputs(), self.outputs())
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    /// Weights (row-major) then bias.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w.iter().chain(self.b.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w.iter_mut().chain(self.b.iter_mut())
    }
}

/// Per-layer gradients, shaped like the model's layers.
pub type Gradients = Vec<Dense>;

pub fn zero_gradients(layers: &[Dense]) -> Gradients {
    layers.iter().map(Dense::zeros_like).collect()
}

pub fn accumulate(into: &mut Gradients, from: &Gradients) {
    for (a, b) in into.iter_mut().zip(from) {
        a.w += &b.w;
        a.b += &b.b;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QNetwork {
    Gcn(GcnModel),
    Mlp(MlpModel),
}

impl QNetwork {
    pub fn new<R: Rng>(
        kind: ModelKind,
        rows: usize,
        hidden: [usize; 2],
        encoding: InputEncoding,
        d_min: f64,
        rng: &mut R,
    ) -> Self {
        match kind {
            ModelKind::Gcn => QNetwork::Gcn(GcnModel::new(hidden, encoding, d_min, rng)),
            ModelKind::Mlp => QNetwork::Mlp(MlpModel::new(rows, hidden, encoding, rng)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            QNetwork::Gcn(_) => ModelKind::Gcn,
            QNetwork::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn layers(&self) -> &[Dense] {
        match self {
            QNetwork::Gcn(m) => &m.layers,
            QNetwork::Mlp(m) => &m.layers,
        }
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        match self {
            QNetwork::Gcn(m) => &mut m.layers,
            QNetwork::Mlp(m) => &mut m.layers,
        }
    }

    pub fn encoding(&self) -> &InputEncoding {
        match self {
            QNetwork::Gcn(m) => &m.encoding,
            QNetwork::Mlp(m) => &m.encoding,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(Dense::param_count).sum()
    }

    pub fn forward(&self, obs: &Observation) -> QValues {
        match self {
            QNetwork::Gcn(m) => gcn_forward(obs, m),
            QNetwork::Mlp(m) => mlp_forward(obs, m),
        }
    }

    /// Gradient of `Σ_a dq[a]·Q(obs)[a]` with respect to every parameter.
    pub fn backward(&self, obs: &Observation, dq: &QValues) -> Gradients {
        match self {
            QNetwork::Gcn(m) => m.backward(obs, dq),
            QNetwork::Mlp(m) => m.backward(obs, dq),
        }
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn relu_mask(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn q_from(row: ndarray::ArrayView1<f64>) -> QValues {
    let mut q = [0.0; ACTION_COUNT];
    for (dst, &src) in q.iter_mut().zip(row.iter()) {
        *dst = src;
    }
    q
}
