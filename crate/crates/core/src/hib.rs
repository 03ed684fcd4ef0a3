//! Hypergraph information bottleneck loss.
//!
//! Each layer contributes a supervised cross-entropy term on its prediction
//! plus `beta` times the mean Bernoulli divergence of its incidence entries
//! from the uninformative `Bernoulli(0.5)` prior. The total loss is the mean
//! over layers.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

/// `KL(Bernoulli(p) || Bernoulli(0.5)) = p ln(2p) + (1 - p) ln(2(1 - p))`,
/// with `0 ln 0 = 0`, so both endpoints evaluate to `ln 2`.
pub fn bernoulli_kl(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfDomain(p));
    }
    let term = |q: f64| if q == 0.0 { 0.0 } else { q * (2.0 * q).ln() };
    Ok(term(p) + term(1.0 - p))
}

/// Mean Bernoulli divergence over all `n * m` incidence entries.
pub fn kl_structure_term(h: &Hypergraph) -> Result<f64> {
    let data = h.incidence().data();
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &p in data {
        total += bernoulli_kl(p)?;
    }
    Ok(total / data.len() as f64)
}

/// Summed softmax cross-entropy of `logits` over the nodes selected by `mask`.
pub fn cross_entropy_term(logits: &Tensor, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.constant(logits.clone());
    let ce = tape.softmax_cross_entropy(x, labels, mask)?;
    Ok(tape.value(ce).data()[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerLoss {
    pub ce: f64,
    pub kl: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HibLossBreakdown {
    pub per_layer: Vec<LayerLoss>,
    pub total: f64,
    pub beta: f64,
}

impl HibLossBreakdown {
    /// Assembles the breakdown from per-layer `(ce, kl)` pairs.
    pub fn from_components(components: &[(f64, f64)], beta: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("loss needs at least one layer".into()));
        }
        let per_layer: Vec<LayerLoss> = components
            .iter()
            .map(|&(ce, kl)| LayerLoss {
                ce,
                kl,
                loss: ce + beta * kl,
            })
            .collect();
        let total = per_layer.iter().map(|l| l.loss).sum::<f64>() / per_layer.len() as f64;
        Ok(Self {
            per_layer,
            total,
            beta,
        })
    }

    pub fn mean_ce(&self) -> f64 {
        self.per_layer.iter().map(|l| l.ce).sum::<f64>() / self.per_layer.len() as f64
    }

    pub fn mean_kl(&self) -> f64 {
        self.per_layer.iter().map(|l| l.kl).sum::<f64>() / self.per_layer.len() as f64
    }
}

/// Tape handles of one layer's structure and prediction.
#[derive(Debug, Clone, Copy)]
pub struct LayerOutput {
    pub h: Var,
    pub y_hat: Var,
}

/// Records the loss averaged over layers and returns it with its breakdown.
pub fn hib_loss(
    tape: &mut Tape,
    layers: &[LayerOutput],
    labels: &[usize],
    train_mask: &[bool],
    beta: f64,
) -> Result<(Var, HibLossBreakdown)> {
    if layers.is_empty() {
        return Err(Error::InvalidConfig("loss needs at least one layer".into()));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidConfig(format!("beta must be non-negative, got {beta}")));
    }
    let mut components = Vec::with_capacity(layers.len());
    let mut total: Option<Var> = None;
    for layer in layers {
        let ce = tape.softmax_cross_entropy(layer.y_hat, labels, train_mask)?;
        let kl = tape.bernoulli_kl_mean(layer.h)?;
        components.push((tape.value(ce).data()[0], tape.value(kl).data()[0]));
        let weighted = tape.scale(kl, beta)?;
        let layer_loss = tape.add(ce, weighted)?;
        total = Some(match total {
            None => layer_loss,
            Some(acc) => tape.add(acc, layer_loss)?,
        });
    }
    let loss = tape.scale(total.expect("non-empty"), 1.0 / layers.len() as f64)?;
    let mut breakdown = HibLossBreakdown::from_components(&components, beta)?;
    breakdown.total = tape.value(loss).data()[0];
    Ok((loss, breakdown))
}

/// Plug-in mutual information (nats) between paired incidence entries.
///
/// Entries of both matrices are treated as i.i.d. paired samples and binned
/// into `bins` equal-width bins over `[0, 1]`.
pub fn empirical_mi(h0: &Hypergraph, hl: &Hypergraph, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 bins, got {bins}")));
    }
    if h0.incidence().shape() != hl.incidence().shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            h0.incidence().shape(),
            hl.incidence().shape()
        )));
    }
    Ok(binned_mi(h0.incidence().data(), hl.incidence().data(), bins))
}

fn bin_of(x: f64, bins: usize) -> usize {
    ((x * bins as f64).floor() as usize).min(bins - 1)
}

pub(crate) fn binned_mi(xs: &[f64], ys: &[f64], bins: usize) -> f64 {
    let n = xs.len();
    if n == 0 {
        return 0.0;
    }
    let mut joint = vec![0usize; bins * bins];
    let mut px = vec![0usize; bins];
    let mut py = vec![0usize; bins];
    for (&x, &y) in xs.iter().zip(ys) {
        let (bx, by) = (bin_of(x, bins), bin_of(y, bins));
        joint[bx * bins + by] += 1;
        px[bx] += 1;
        py[by] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for bx in 0..bins {
        for by in 0..bins {
            let c = joint[bx * bins + by];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / nf;
            mi += pxy * (c as f64 * nf / (px[bx] as f64 * py[by] as f64)).ln();
        }
    }
    mi.max(0.0)
}
