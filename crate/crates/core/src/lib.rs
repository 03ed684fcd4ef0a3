//! Hypergraph structure learning with an information bottleneck loss.
//!
//! The crate provides a small reverse-mode autodiff tape over dense
//! matrices, hypergraph containers and operators, the attention-based
//! structure learning layers, the loss, perturbation utilities and the
//! training loop.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod experiment;
pub mod hib;
pub mod hypergraph;
pub mod layers;
pub mod model;
pub mod perturb;
pub mod rng;
pub mod train;

pub use autodiff::{Adam, Tape, Tensor, Var};
pub use data::{load_dataset, LabeledDataset, PlantedConfig, Split, Structure};
pub use error::{Error, Result};
pub use hib::{bernoulli_kl, empirical_mi, hib_loss, HibLossBreakdown};
pub use hypergraph::{Graph, Hypergraph};
pub use model::{forward, LayerState, ModelParams, Preset, TrainConfig};
pub use perturb::{PerturbKind, PerturbSpec};
pub use train::{evaluate, run_seeds, train, SeedSummary, TrainingLog};
