//! Hypergraphs with hyperedge-dependent vertex weights, plain graphs, and
//! conversions between the two.
//!
//! The incidence matrix `H` is `n x m` with `H(v, e)` in `[0, 1]`; zero means
//! `v` is not a member of `e`. Degrees are row and column sums of `H`:
//!
//! ```text
//! d(v) = sum_e H(v, e)        d(e) = sum_v H(v, e)
//! ```
//!
//! Whenever a degree is inverted, a zero degree maps to a zero inverse so
//! isolated vertices and empty hyperedges propagate zeros.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    incidence: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVectors {
    pub vertex: Vec<f64>,
    pub hyperedge: Vec<f64>,
}

impl DegreeVectors {
    pub fn all_positive(&self) -> bool {
        self.vertex.iter().chain(&self.hyperedge).all(|&d| d > 0.0)
    }
}

fn inv_or_zero(d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        1.0 / d
    }
}

fn inv_sqrt_or_zero(d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        1.0 / d.sqrt()
    }
}

impl Hypergraph {
    /// Validates and wraps a dense `n x m` incidence matrix.
    pub fn from_dense(incidence: Tensor) -> Result<Self> {
        if incidence.rows() == 0 {
            return Err(Error::Validation("hypergraph needs at least one vertex".into()));
        }
        for v in 0..incidence.rows() {
            for e in 0..incidence.cols() {
                let w = incidence.get(v, e);
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidWeight {
                        vertex: v,
                        hyperedge: e,
                        weight: w,
                    });
                }
            }
        }
        Ok(Self { incidence })
    }

    pub fn empty(n_vertices: usize) -> Result<Self> {
        Self::from_dense(Tensor::zeros(n_vertices, 0))
    }

    /// Binary membership lists, one per hyperedge.
    pub fn from_hyperedges<M: AsRef<[usize]>>(n_vertices: usize, hyperedges: &[M]) -> Result<Self> {
        let weighted: Vec<(Vec<usize>, Option<Vec<f64>>)> = hyperedges
            .iter()
            .map(|m| (m.as_ref().to_vec(), None))
            .collect();
        Self::from_weighted_hyperedges(n_vertices, &weighted)
    }

    /// Membership lists with optional per-member weights (default 1.0).
    pub fn from_weighted_hyperedges(
        n_vertices: usize,
        hyperedges: &[(Vec<usize>, Option<Vec<f64>>)],
    ) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::Validation("hypergraph needs at least one vertex".into()));
        }
        let m = hyperedges.len();
        let mut incidence = Tensor::zeros(n_vertices, m);
        for (e, (members, weights)) in hyperedges.iter().enumerate() {
            if let Some(w) = weights {
                if w.len() != members.len() {
                    return Err(Error::Validation(format!(
                        "hyperedge {e} has {} members but {} weights",
                        members.len(),
                        w.len()
                    )));
                }
            }
            let mut seen = BTreeSet::new();
            for (k, &v) in members.iter().enumerate() {
                if v >= n_vertices {
                    return Err(Error::VertexOutOfRange {
                        index: v,
                        n_vertices,
                    });
                }
                if !seen.insert(v) {
                    return Err(Error::Validation(format!(
                        "vertex {v} listed twice in hyperedge {e}"
                    )));
                }
                let w = weights.as_ref().map_or(1.0, |w| w[k]);
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidWeight {
                        vertex: v,
                        hyperedge: e,
                        weight: w,
                    });
                }
                incidence.set(v, e, w);
            }
        }
        Ok(Self { incidence })
    }

    /// Coordinate-list construction; later duplicates overwrite earlier ones.
    pub fn from_triplets(
        n_vertices: usize,
        n_hyperedges: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut incidence = Tensor::zeros(n_vertices, n_hyperedges);
        for &(v, e, w) in triplets {
            if v >= n_vertices {
                return Err(Error::VertexOutOfRange {
                    index: v,
                    n_vertices,
                });
            }
            if e >= n_hyperedges {
                return Err(Error::Validation(format!(
                    "hyperedge index {e} out of range for {n_hyperedges} hyperedges"
                )));
            }
            incidence.set(v, e, w);
        }
        Self::from_dense(incidence)
    }

    pub fn n_vertices(&self) -> usize {
        self.incidence.rows()
    }

    pub fn n_hyperedges(&self) -> usize {
        self.incidence.cols()
    }

    pub fn incidence(&self) -> &Tensor {
        &self.incidence
    }

    pub fn into_incidence(self) -> Tensor {
        self.incidence
    }

    pub fn weight(&self, v: usize, e: usize) -> f64 {
        self.incidence.get(v, e)
    }

    /// Nonzero entries as `(vertex, hyperedge, weight)`, hyperedge-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for e in 0..self.n_hyperedges() {
            for v in 0..self.n_vertices() {
                let w = self.weight(v, e);
                if w != 0.0 {
                    out.push((v, e, w));
                }
            }
        }
        out
    }

    /// Vertices with nonzero weight in hyperedge `e`, ascending.
    pub fn members(&self, e: usize) -> Vec<usize> {
        (0..self.n_vertices())
            .filter(|&v| self.weight(v, e) > 0.0)
            .collect()
    }

    pub fn hyperedge_column(&self, e: usize) -> Vec<f64> {
        (0..self.n_vertices()).map(|v| self.weight(v, e)).collect()
    }

    pub fn degrees(&self) -> DegreeVectors {
        let (n, m) = (self.n_vertices(), self.n_hyperedges());
        let mut vertex = vec![0.0; n];
        let mut hyperedge = vec![0.0; m];
        for (v, dv) in vertex.iter_mut().enumerate() {
            for (e, de) in hyperedge.iter_mut().enumerate() {
                let w = self.incidence.get(v, e);
                *dv += w;
                *de += w;
            }
        }
        DegreeVectors { vertex, hyperedge }
    }

    /// `H D_e^{-1} H^T` scaled on both sides by `left` and `right` diagonals.
    fn smoothing(&self, left: &[f64], right: &[f64]) -> Tensor {
        let deg = self.degrees();
        let (n, m) = (self.n_vertices(), self.n_hyperedges());
        // scaled = D_e^{-1} H^T, m x n
        let mut scaled = Tensor::zeros(m, n);
        for e in 0..m {
            let inv = inv_or_zero(deg.hyperedge[e]);
            for v in 0..n {
                scaled.set(e, v, self.incidence.get(v, e) * inv * right[v]);
            }
        }
        let mut out = self.incidence.matmul(&scaled).expect("incidence shapes");
        for v in 0..n {
            let l = left[v];
            out.row_mut(v).iter_mut().for_each(|x| *x *= l);
        }
        out
    }

    /// `D_v^{-1/2} H D_e^{-1} H^T D_v^{-1/2}`, the spectral smoothing operator.
    pub fn spectral_operator(&self) -> Tensor {
        let s: Vec<f64> = self.degrees().vertex.into_iter().map(inv_sqrt_or_zero).collect();
        self.smoothing(&s, &s)
    }

    /// `D_v^{-1} H D_e^{-1} H^T`, the vertex-hyperedge-vertex propagation operator.
    pub fn spatial_operator(&self) -> Tensor {
        let left: Vec<f64> = self.degrees().vertex.into_iter().map(inv_or_zero).collect();
        self.smoothing(&left, &vec![1.0; self.n_vertices()])
    }

    /// `I - D_v^{-1/2} H D_e^{-1} H^T D_v^{-1/2}` with the zero-inverse
    /// convention for vanishing degrees.
    pub fn laplacian(&self) -> Tensor {
        let mut lap = self.spectral_operator().map(|x| -x);
        for v in 0..self.n_vertices() {
            let d = lap.get(v, v);
            lap.set(v, v, 1.0 + d);
        }
        lap
    }

    /// Like [`Hypergraph::laplacian`] but rejects zero degrees.
    pub fn laplacian_strict(&self) -> Result<Tensor> {
        let deg = self.degrees();
        if let Some(v) = deg.vertex.iter().position(|&d| d == 0.0) {
            return Err(Error::DegenerateStructure(format!("vertex {v} has degree 0")));
        }
        if let Some(e) = deg.hyperedge.iter().position(|&d| d == 0.0) {
            return Err(Error::DegenerateStructure(format!("hyperedge {e} has degree 0")));
        }
        Ok(self.laplacian())
    }

    /// Simple graph joining every pair of distinct vertices that share a hyperedge.
    pub fn clique_expansion(&self) -> Graph {
        let mut edges = BTreeSet::new();
        for e in 0..self.n_hyperedges() {
            let members = self.members(e);
            for (i, &u) in members.iter().enumerate() {
                for &v in &members[i + 1..] {
                    edges.insert((u, v));
                }
            }
        }
        Graph {
            n_vertices: self.n_vertices(),
            edges,
        }
    }

    /// Keeps the listed hyperedge columns, in the given order.
    pub fn select_hyperedges(&self, keep: &[usize]) -> Self {
        let n = self.n_vertices();
        let mut incidence = Tensor::zeros(n, keep.len());
        for (new_e, &e) in keep.iter().enumerate() {
            for v in 0..n {
                incidence.set(v, new_e, self.weight(v, e));
            }
        }
        Self { incidence }
    }

    /// Appends hyperedge columns given as full weight vectors of length n.
    pub fn with_extra_hyperedges(&self, columns: &[Vec<f64>]) -> Result<Self> {
        let (n, m) = (self.n_vertices(), self.n_hyperedges());
        let mut incidence = Tensor::zeros(n, m + columns.len());
        for v in 0..n {
            incidence.row_mut(v)[..m].copy_from_slice(self.incidence.row(v));
        }
        for (k, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "hyperedge column of length {} for {n} vertices",
                    col.len()
                )));
            }
            for (v, &w) in col.iter().enumerate() {
                incidence.set(v, m + k, w);
            }
        }
        Self::from_dense(incidence)
    }

    pub fn to_file(&self) -> HypergraphFile {
        let hyperedges = (0..self.n_hyperedges())
            .map(|e| {
                let members = self.members(e);
                let weights: Vec<f64> = members.iter().map(|&v| self.weight(v, e)).collect();
                let binary = weights.iter().all(|&w| w == 1.0);
                HyperedgeRecord {
                    members,
                    weights: (!binary).then_some(weights),
                }
            })
            .collect();
        HypergraphFile {
            n_vertices: self.n_vertices(),
            hyperedges,
        }
    }

    pub fn from_file(file: &HypergraphFile) -> Result<Self> {
        let edges: Vec<(Vec<usize>, Option<Vec<f64>>)> = file
            .hyperedges
            .iter()
            .map(|h| (h.members.clone(), h.weights.clone()))
            .collect();
        Self::from_weighted_hyperedges(file.n_vertices, &edges)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HypergraphFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("hypergraph serializes")
    }
}

/// On-disk hypergraph: `{"n_vertices": n, "hyperedges": [{"members": [..], "weights": [..]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypergraphFile {
    pub n_vertices: usize,
    pub hyperedges: Vec<HyperedgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperedgeRecord {
    pub members: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Simple undirected graph. Edges are stored as `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_vertices: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Duplicate pairs (in either orientation) collapse to one edge.
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for x in [u, v] {
                if x >= n_vertices {
                    return Err(Error::VertexOutOfRange {
                        index: x,
                        n_vertices,
                    });
                }
            }
            if u == v {
                return Err(Error::Validation(format!("self-loop on vertex {u}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(Self {
            n_vertices,
            edges: set,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj.iter_mut().for_each(|a| a.sort_unstable());
        adj
    }

    /// One hyperedge per vertex containing the vertex and its neighbours.
    pub fn to_hypergraph(&self) -> Hypergraph {
        let mut incidence = Tensor::zeros(self.n_vertices, self.n_vertices);
        for (v, nbrs) in self.neighbors().iter().enumerate() {
            incidence.set(v, v, 1.0);
            for &u in nbrs {
                incidence.set(u, v, 1.0);
            }
        }
        Hypergraph::from_dense(incidence).expect("binary incidence is valid")
    }

    pub(crate) fn with_edges(&self, extra: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges = self.edges.clone();
        edges.extend(extra.into_iter().map(|(u, v)| (u.min(v), u.max(v))));
        Self {
            n_vertices: self.n_vertices,
            edges,
        }
    }

    pub(crate) fn with_edge_set(&self, edges: BTreeSet<(usize, usize)>) -> Self {
        Self {
            n_vertices: self.n_vertices,
            edges,
        }
    }

    /// Parses `u v` pairs, one per line, 0-indexed. Blank lines and lines
    /// starting with `#` are skipped. Without `n_vertices` the vertex count is
    /// one past the largest index.
    pub fn from_edge_list(text: &str, n_vertices: Option<usize>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.ok_or_else(|| Error::Parse(format!("line {}: expected two indices", lineno + 1)))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::Parse(format!(
                    "line {}: expected exactly two indices",
                    lineno + 1
                )));
            }
            pairs.push((u, v));
        }
        let n = n_vertices.unwrap_or_else(|| {
            pairs.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0)
        });
        Self::new(n, pairs)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }
}
