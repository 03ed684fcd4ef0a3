//! Full-batch training with early stopping, evaluation and multi-seed runs.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, Tensor};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::hib::{empirical_mi, hib_loss, kl_structure_term, LayerLoss};
use crate::hypergraph::Hypergraph;
use crate::model::{forward, ModelParams, TrainConfig};
use crate::rng::seeded;

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub ce: f64,
    pub kl: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub per_layer: Vec<LayerLoss>,
    /// Per-layer mutual information with the initial structure, on
    /// diagnostic epochs only.
    pub mi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub stopped_early: bool,
    pub wall_clock_secs: f64,
}

/// JSON summary of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config: TrainConfig,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
    pub wall_clock_secs: f64,
    pub secs_per_epoch: f64,
    pub param_count: usize,
}

impl TrainingLog {
    pub fn epochs_run(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// `epoch,loss,ce,kl,train_acc,val_acc`. Values use the shortest
    /// round-trip representation, so identical runs give identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,ce,kl,train_acc,val_acc\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.loss, r.ce, r.kl, r.train_acc, r.val_acc
            );
        }
        out
    }

    /// `epoch,layer,ce,kl,loss`, layers counted from 1.
    pub fn layer_csv(&self) -> String {
        let mut out = String::from("epoch,layer,ce,kl,loss\n");
        for r in &self.records {
            for (l, layer) in r.per_layer.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", r.epoch, l + 1, layer.ce, layer.kl, layer.loss);
            }
        }
        out
    }

    /// `epoch,layer,mi` for diagnostic epochs.
    pub fn mi_csv(&self) -> String {
        let mut out = String::from("epoch,layer,mi\n");
        for r in &self.records {
            if let Some(mi) = &r.mi {
                for (l, v) in mi.iter().enumerate() {
                    let _ = writeln!(out, "{},{},{}", r.epoch, l + 1, v);
                }
            }
        }
        out
    }

    pub fn summary(&self, cfg: &TrainConfig, params: &ModelParams, test_acc: f64) -> TrainSummary {
        let epochs = self.epochs_run();
        TrainSummary {
            config: cfg.clone(),
            epochs_run: epochs,
            best_epoch: self.best_epoch,
            best_val_acc: self.best_val_acc,
            test_acc,
            wall_clock_secs: self.wall_clock_secs,
            secs_per_epoch: if epochs == 0 { 0.0 } else { self.wall_clock_secs / epochs as f64 },
            param_count: params.param_count(),
        }
    }
}

/// Fraction of masked rows whose argmax equals the label.
pub fn accuracy(logits: &Tensor, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if logits.rows() != labels.len() || mask.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} logit rows, {} labels, {} mask entries",
            logits.rows(),
            labels.len(),
            mask.len()
        )));
    }
    let pred = logits.argmax_rows();
    let (mut hit, mut total) = (0usize, 0usize);
    for i in 0..labels.len() {
        if mask[i] {
            total += 1;
            hit += usize::from(pred[i] == labels[i]);
        }
    }
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(hit as f64 / total as f64)
}

fn check_masks(ds: &LabeledDataset) -> Result<()> {
    ds.validate()
        .map_err(|e| Error::DatasetMask(e.to_string()))?;
    if !ds.train_mask.iter().any(|&b| b) {
        return Err(Error::DatasetMask("training mask is empty".into()));
    }
    if !ds.val_mask.iter().any(|&b| b) {
        return Err(Error::DatasetMask("validation mask is empty".into()));
    }
    Ok(())
}

/// Trains from a fresh initialization seeded by `cfg.seed` and returns the
/// parameters with the best validation accuracy.
///
/// Each epoch takes one Adam step on the layer-averaged loss, then scores
/// the updated parameters without dropout. Training stops after
/// `cfg.patience` epochs without a strict improvement in validation
/// accuracy, or at `cfg.max_epochs`.
pub fn train(dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<(ModelParams, TrainingLog)> {
    cfg.validate()?;
    check_masks(dataset)?;
    let start = Instant::now();
    let h0 = dataset.hypergraph();
    let mut rng = seeded(cfg.seed);
    let mut params = ModelParams::init(dataset.d_feat(), dataset.n_classes, cfg, &mut rng)?;
    let mut adam = Adam::new(cfg.lr);

    let mut best = params.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut records = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let mut pass = forward(&params, &h0, &dataset.features, cfg, &mut rng, true)?;
        let outputs = pass.outputs();
        let (loss, breakdown) = hib_loss(
            &mut pass.tape,
            &outputs,
            &dataset.labels,
            &dataset.train_mask,
            cfg.beta,
        )?;
        let grads = pass.tape.backward(loss)?;
        let grad_tensors: Vec<Tensor> = pass
            .params
            .all()
            .iter()
            .zip(params.tensors())
            .map(|(&v, like)| grads.get_or_zeros(v, like))
            .collect();
        let grad_refs: Vec<&Tensor> = grad_tensors.iter().collect();
        adam.step(&mut params.tensors_mut(), &grad_refs)?;

        let eval = forward(&params, &h0, &dataset.features, cfg, &mut rng, false)?;
        let logits = eval.logits();
        let train_acc = accuracy(logits, &dataset.labels, &dataset.train_mask)?;
        let val_acc = accuracy(logits, &dataset.labels, &dataset.val_mask)?;
        let mi = if cfg.mi_every > 0 && epoch % cfg.mi_every == 0 {
            let states = eval.states()?;
            Some(
                states
                    .iter()
                    .map(|s| empirical_mi(&h0, &s.h, cfg.mi_bins))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        records.push(EpochRecord {
            epoch,
            loss: breakdown.total,
            ce: breakdown.mean_ce(),
            kl: breakdown.mean_kl(),
            train_acc,
            val_acc,
            per_layer: breakdown.per_layer,
            mi,
        });

        if val_acc > best_val {
            best_val = val_acc;
            best_epoch = epoch;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    Ok((
        best,
        TrainingLog {
            records,
            best_epoch,
            best_val_acc: best_val,
            stopped_early,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Accuracy of the last layer's predictions on the mask named `train`,
/// `val` or `test`.
pub fn evaluate(
    params: &ModelParams,
    dataset: &LabeledDataset,
    cfg: &TrainConfig,
    mask_name: &str,
) -> Result<f64> {
    let mask = dataset.mask(mask_name)?;
    let pass = forward(params, &dataset.hypergraph(), &dataset.features, cfg, &mut seeded(0), false)?;
    accuracy(pass.logits(), &dataset.labels, mask)
}

/// Per-layer structure statistics of a trained model, without dropout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureDiagnostics {
    /// Mean Bernoulli divergence of each `H^(l)` from 0.5.
    pub kl: Vec<f64>,
    /// Plug-in mutual information between `H0` and each `H^(l)`.
    pub mi: Vec<f64>,
}

pub fn structure_diagnostics(
    params: &ModelParams,
    h0: &Hypergraph,
    features: &Tensor,
    cfg: &TrainConfig,
) -> Result<StructureDiagnostics> {
    let pass = forward(params, h0, features, cfg, &mut seeded(0), false)?;
    let states = pass.states()?;
    let bins = cfg.mi_bins.max(2);
    Ok(StructureDiagnostics {
        kl: states.iter().map(|s| kl_structure_term(&s.h)).collect::<Result<_>>()?,
        mi: states.iter().map(|s| empirical_mi(h0, &s.h, bins)).collect::<Result<_>>()?,
    })
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub test_acc: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub final_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub runs: Vec<RunResult>,
    pub mean: f64,
    pub std: f64,
}

/// Sample mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl SeedSummary {
    pub fn from_runs(runs: Vec<RunResult>) -> Self {
        let accs: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
        let (mean, std) = mean_std(&accs);
        Self { runs, mean, std }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.test_acc).collect()
    }
}

/// Trains and tests one model with `cfg.seed`.
pub fn run_once(dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<RunResult> {
    let (params, log) = train(dataset, cfg)?;
    let test_acc = evaluate(&params, dataset, cfg, "test")?;
    Ok(RunResult {
        seed: cfg.seed,
        test_acc,
        best_epoch: log.best_epoch,
        epochs_run: log.epochs_run(),
        final_kl: log.last().map_or(f64::NAN, |r| r.kl),
    })
}

/// Trains `n_seeds` models with seeds `cfg.seed + i` in parallel and
/// reports the mean and sample standard deviation of test accuracy.
pub fn run_seeds(dataset: &LabeledDataset, cfg: &TrainConfig, n_seeds: usize) -> Result<SeedSummary> {
    if n_seeds == 0 {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let runs = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = TrainConfig {
                seed: cfg.seed.wrapping_add(i),
                ..cfg.clone()
            };
            run_once(dataset, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedSummary::from_runs(runs))
}
