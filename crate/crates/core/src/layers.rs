//! Hypergraph convolutions and the attention-based structure update.
//!
//! All operators record onto a [`Tape`] so they participate in training. The
//! incidence matrix enters the spatial operators as a tape value, which lets
//! gradients reach the learned structure.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::rng::{Rng, RngExt};

/// Trainable convolution weights `d_in x d_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConvWeights(pub Tensor);

impl ConvWeights {
    /// Glorot-uniform initialization.
    pub fn glorot(d_in: usize, d_out: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (d_in + d_out) as f64).sqrt();
        let data = (0..d_in * d_out)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        Self(Tensor::new(d_in, d_out, data).expect("glorot shape"))
    }

    pub fn d_in(&self) -> usize {
        self.0.rows()
    }

    pub fn d_out(&self) -> usize {
        self.0.cols()
    }
}

/// `K` attention heads over `d`-dimensional embeddings, stored as a `K x d`
/// matrix whose row `i` is the elementwise weighting of head `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttentionHeads(pub Tensor);

impl AttentionHeads {
    /// All-ones heads: every head starts as plain cosine similarity.
    pub fn ones(heads: usize, dim: usize) -> Result<Self> {
        if heads == 0 {
            return Err(Error::InvalidConfig("at least one attention head is required".into()));
        }
        Ok(Self(Tensor::ones(heads, dim)))
    }

    pub fn heads(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }
}

/// Cached normalizations of one incidence matrix `H`:
/// `D_v^{-1} H` (n x m) and `D_e^{-1} H^T` (m x n).
#[derive(Debug, Clone, Copy)]
pub struct Propagator {
    vertex_side: Var,
    hyperedge_side: Var,
}

impl Propagator {
    pub fn new(tape: &mut Tape, h: Var) -> Result<Self> {
        let vertex_side = tape.row_normalize(h)?;
        let ht = tape.transpose(h)?;
        let hyperedge_side = tape.row_normalize(ht)?;
        Ok(Self {
            vertex_side,
            hyperedge_side,
        })
    }

    /// Weighted mean of member embeddings per hyperedge.
    pub fn embed_hyperedges(&self, tape: &mut Tape, z: Var) -> Result<Var> {
        tape.matmul(self.hyperedge_side, z)
    }

    /// Vertex to hyperedge to vertex message passing of `x`.
    pub fn propagate(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let e = self.embed_hyperedges(tape, x)?;
        tape.matmul(self.vertex_side, e)
    }
}

/// `D_v^{-1} H D_e^{-1} H^T X Theta`.
pub fn spatial_conv(tape: &mut Tape, h: Var, x: Var, theta: Var) -> Result<Var> {
    let xw = tape.matmul(x, theta)?;
    Propagator::new(tape, h)?.propagate(tape, xw)
}

/// `D_v^{-1/2} H D_e^{-1} H^T D_v^{-1/2} X Theta` on a fixed structure.
pub fn spectral_conv(tape: &mut Tape, h: &Hypergraph, x: Var, theta: Var) -> Result<Var> {
    if tape.value(x).rows() != h.n_vertices() {
        return Err(Error::ShapeMismatch {
            op: "spectral_conv",
            detail: format!(
                "{} feature rows for {} vertices",
                tape.value(x).rows(),
                h.n_vertices()
            ),
        });
    }
    let op = tape.constant(h.spectral_operator());
    let xw = tape.matmul(x, theta)?;
    tape.matmul(op, xw)
}

/// `z_e = sum_u H(u, e) z_u / d(e)`; empty hyperedges embed to zero.
pub fn hyperedge_embed(tape: &mut Tape, h: Var, z: Var) -> Result<Var> {
    let ht = tape.transpose(h)?;
    let norm = tape.row_normalize(ht)?;
    tape.matmul(norm, z)
}

/// `A(v, e) = 1/K sum_i cos(z_v * phi_i, z_e * phi_i)`, an `n x m` matrix.
pub fn attention_scores(tape: &mut Tape, z_v: Var, z_e: Var, heads: Var) -> Result<Var> {
    let k = tape.value(heads).rows();
    let d = tape.value(heads).cols();
    if k == 0 {
        return Err(Error::InvalidConfig("attention needs at least one head".into()));
    }
    for (name, v) in [("vertex", z_v), ("hyperedge", z_e)] {
        if tape.value(v).cols() != d {
            return Err(Error::ShapeMismatch {
                op: "attention_scores",
                detail: format!(
                    "{name} embeddings have {} columns, heads have {d}",
                    tape.value(v).cols()
                ),
            });
        }
    }
    let mut total: Option<Var> = None;
    for i in 0..k {
        let phi = tape.row(heads, i)?;
        let wv = tape.mul_row(z_v, phi)?;
        let we = tape.mul_row(z_e, phi)?;
        let sim = tape.cosine_similarity(wv, we)?;
        total = Some(match total {
            None => sim,
            Some(acc) => tape.add(acc, sim)?,
        });
    }
    tape.scale(total.expect("k >= 1"), 1.0 / k as f64)
}

/// Thresholds attention at `epsilon` (entries below it are dropped), clamps
/// the survivors to `[0, 1]` and returns `alpha * H0 + (1 - alpha) * masked`.
///
/// The threshold pattern is constant with respect to differentiation.
pub fn mask_and_combine(
    tape: &mut Tape,
    a: Var,
    h0: &Hypergraph,
    alpha: f64,
    epsilon: f64,
) -> Result<Var> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if tape.value(a).shape() != h0.incidence().shape() {
        return Err(Error::ShapeMismatch {
            op: "mask_and_combine",
            detail: format!(
                "attention {:?} vs incidence {:?}",
                tape.value(a).shape(),
                h0.incidence().shape()
            ),
        });
    }
    let keep: Vec<bool> = tape.value(a).data().iter().map(|&x| x >= epsilon).collect();
    let masked = tape.mask(a, keep)?;
    let learned = tape.clamp(masked, 0.0, 1.0)?;
    let learned = tape.scale(learned, 1.0 - alpha)?;
    let base = tape.constant(h0.incidence().clone());
    let base = tape.scale(base, alpha)?;
    tape.add(base, learned)
}
