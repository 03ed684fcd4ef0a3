//! The layered structure-learning network: configuration, parameters and
//! the forward pass.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::hib::LayerOutput;
use crate::hypergraph::Hypergraph;
use crate::layers::{attention_scores, mask_and_combine, AttentionHeads, ConvWeights, Propagator};
use crate::rng::Rng;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub num_layers: usize,
    pub heads: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Epoch interval of the mutual-information diagnostic; 0 disables it.
    #[serde(default = "default_mi_every")]
    pub mi_every: usize,
    #[serde(default = "default_mi_bins")]
    pub mi_bins: usize,
}

fn default_mi_every() -> usize {
    50
}

fn default_mi_bins() -> usize {
    10
}

impl Default for TrainConfig {
    fn default() -> Self {
        Preset::Cora.config()
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be non-negative, got {}", self.beta)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        if self.num_layers == 0 {
            return Err(Error::InvalidConfig("at least one layer is required".into()));
        }
        if self.heads == 0 {
            return Err(Error::InvalidConfig("at least one attention head is required".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("hidden dimension must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidRate(self.dropout));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be non-negative, got {}", self.lr)));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be positive".into()));
        }
        if self.mi_every > 0 && self.mi_bins < 2 {
            return Err(Error::InvalidConfig("mi_bins must be at least 2".into()));
        }
        Ok(())
    }
}

/// Per-dataset hyperparameter rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Cora,
    Citeseer,
    Yummly10k,
    Dblp,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Cora, Preset::Citeseer, Preset::Yummly10k, Preset::Dblp];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Cora => "cora",
            Preset::Citeseer => "citeseer",
            Preset::Yummly10k => "yummly10k",
            Preset::Dblp => "dblp",
        }
    }

    /// `(alpha, beta, epsilon, layers)`.
    pub fn hyperparameters(self) -> (f64, f64, f64, usize) {
        match self {
            Preset::Cora => (0.7, 0.01, 0.0, 5),
            Preset::Citeseer => (0.8, 0.01, 0.1, 5),
            Preset::Yummly10k => (0.5, 0.1, 0.1, 10),
            Preset::Dblp => (0.5, 1.0, 0.1, 7),
        }
    }

    pub fn config(self) -> TrainConfig {
        let (alpha, beta, epsilon, num_layers) = self.hyperparameters();
        TrainConfig {
            alpha,
            beta,
            epsilon,
            num_layers,
            heads: 6,
            hidden_dim: 16,
            dropout: 0.5,
            lr: 0.01,
            max_epochs: 10_000,
            patience: 500,
            seed: 0,
            mi_every: default_mi_every(),
            mi_bins: default_mi_bins(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset `{s}`")))
    }
}

/// Trainable parameters. `phi1` scores raw features for the first layer;
/// `phi2` is shared by all later layers, as are `theta1` and `theta2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub phi1: AttentionHeads,
    pub phi2: AttentionHeads,
    pub theta1: ConvWeights,
    pub theta2: ConvWeights,
}

impl ModelParams {
    pub fn init(d_feat: usize, n_classes: usize, cfg: &TrainConfig, rng: &mut Rng) -> Result<Self> {
        if d_feat == 0 || n_classes == 0 {
            return Err(Error::InvalidConfig("feature and class counts must be positive".into()));
        }
        Ok(Self {
            phi1: AttentionHeads::ones(cfg.heads, d_feat)?,
            phi2: AttentionHeads::ones(cfg.heads, cfg.hidden_dim)?,
            theta1: ConvWeights::glorot(d_feat, cfg.hidden_dim, rng),
            theta2: ConvWeights::glorot(cfg.hidden_dim, n_classes, rng),
        })
    }

    pub fn d_feat(&self) -> usize {
        self.theta1.d_in()
    }

    pub fn hidden_dim(&self) -> usize {
        self.theta1.d_out()
    }

    pub fn n_classes(&self) -> usize {
        self.theta2.d_out()
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn tensors(&self) -> [&Tensor; 4] {
        [&self.phi1.0, &self.phi2.0, &self.theta1.0, &self.theta2.0]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 4] {
        [
            &mut self.phi1.0,
            &mut self.phi2.0,
            &mut self.theta1.0,
            &mut self.theta2.0,
        ]
    }

    fn check(&self, x: &Tensor, cfg: &TrainConfig) -> Result<()> {
        let d = self.d_feat();
        let hid = self.hidden_dim();
        if x.cols() != d {
            return Err(Error::ShapeMismatch {
                op: "forward",
                detail: format!("features have {} columns, model expects {d}", x.cols()),
            });
        }
        if self.phi1.dim() != d || self.phi2.dim() != hid || self.theta2.d_in() != hid {
            return Err(Error::ShapeMismatch {
                op: "forward",
                detail: "parameter dimensions do not chain".into(),
            });
        }
        if self.phi1.heads() != cfg.heads || self.phi2.heads() != cfg.heads {
            return Err(Error::ShapeMismatch {
                op: "forward",
                detail: format!("parameters have {} heads, config {}", self.phi1.heads(), cfg.heads),
            });
        }
        Ok(())
    }
}

/// Tape handles of the four parameter groups.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub phi1: Var,
    pub phi2: Var,
    pub theta1: Var,
    pub theta2: Var,
}

impl ParamVars {
    pub fn all(&self) -> [Var; 4] {
        [self.phi1, self.phi2, self.theta1, self.theta2]
    }
}

/// Tape handles of one layer: `H`, `Z` and the logits.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub h: Var,
    pub z: Var,
    pub y_hat: Var,
}

/// Materialized output of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub h: Hypergraph,
    pub z: Tensor,
    pub y_hat: Tensor,
}

/// A recorded forward pass.
pub struct ForwardPass {
    pub tape: Tape,
    pub params: ParamVars,
    pub layers: Vec<LayerVars>,
}

impl ForwardPass {
    pub fn outputs(&self) -> Vec<LayerOutput> {
        self.layers
            .iter()
            .map(|l| LayerOutput { h: l.h, y_hat: l.y_hat })
            .collect()
    }

    /// Logits of the last layer.
    pub fn logits(&self) -> &Tensor {
        self.tape.value(self.layers.last().expect("at least one layer").y_hat)
    }

    pub fn states(&self) -> Result<Vec<LayerState>> {
        self.layers
            .iter()
            .map(|l| {
                Ok(LayerState {
                    h: Hypergraph::from_dense(self.tape.value(l.h).clone())?,
                    z: self.tape.value(l.z).clone(),
                    y_hat: self.tape.value(l.y_hat).clone(),
                })
            })
            .collect()
    }
}

/// Records the full layered forward pass.
///
/// Layer 1 scores `H0` against the raw features with `phi1`; layer `l >= 2`
/// scores `H^(l-1)` against `Z^(l-1)` with `phi2`. Every layer convolves the
/// raw features on its own structure, then maps the hidden embedding to
/// logits on the same structure.
pub fn forward(
    params: &ModelParams,
    h0: &Hypergraph,
    x: &Tensor,
    cfg: &TrainConfig,
    rng: &mut Rng,
    training: bool,
) -> Result<ForwardPass> {
    cfg.validate()?;
    params.check(x, cfg)?;
    if h0.n_vertices() != x.rows() {
        return Err(Error::ShapeMismatch {
            op: "forward",
            detail: format!("{} vertices but {} feature rows", h0.n_vertices(), x.rows()),
        });
    }
    let mut tape = Tape::new();
    let vars = ParamVars {
        phi1: tape.param(params.phi1.0.clone()),
        phi2: tape.param(params.phi2.0.clone()),
        theta1: tape.param(params.theta1.0.clone()),
        theta2: tape.param(params.theta2.0.clone()),
    };
    let layers = record_layers(&mut tape, vars, h0, x, cfg, rng, training)?;
    Ok(ForwardPass {
        tape,
        params: vars,
        layers,
    })
}

/// Records the layers of [`forward`] onto an existing tape, with the
/// parameter groups supplied as tape handles.
pub fn record_layers(
    tape: &mut Tape,
    vars: ParamVars,
    h0: &Hypergraph,
    x: &Tensor,
    cfg: &TrainConfig,
    rng: &mut Rng,
    training: bool,
) -> Result<Vec<LayerVars>> {
    let x = tape.constant(x.clone());
    let h0_var = tape.constant(h0.incidence().clone());
    let xw = tape.matmul(x, vars.theta1)?;

    let mut prev_prop = Propagator::new(tape, h0_var)?;
    let mut prev_z = x;
    let mut layers = Vec::with_capacity(cfg.num_layers);
    for l in 0..cfg.num_layers {
        let heads = if l == 0 { vars.phi1 } else { vars.phi2 };
        let z_e = prev_prop.embed_hyperedges(tape, prev_z)?;
        let a = attention_scores(tape, prev_z, z_e, heads)?;
        let h = mask_and_combine(tape, a, h0, cfg.alpha, cfg.epsilon)?;

        let prop = Propagator::new(tape, h)?;
        let hidden = prop.propagate(tape, xw)?;
        let hidden = tape.relu(hidden)?;
        let z = tape.dropout(hidden, cfg.dropout, rng, training)?;
        let zw = tape.matmul(z, vars.theta2)?;
        let y_hat = prop.propagate(tape, zw)?;

        layers.push(LayerVars { h, z, y_hat });
        prev_prop = prop;
        prev_z = z;
    }
    Ok(layers)
}
