//! Structure perturbations: random deletion and addition of edges and
//! hyperedges, and class-mixing noise hyperedges.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, Structure};
use crate::error::{Error, Result};
use crate::hypergraph::{Graph, Hypergraph};
use crate::rng::{seeded, Rng, RngExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    Clean,
    DeleteEdges,
    AddEdges,
    DeleteHyperedges,
    AddHyperedges,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 5] = [
        PerturbKind::Clean,
        PerturbKind::DeleteEdges,
        PerturbKind::AddEdges,
        PerturbKind::DeleteHyperedges,
        PerturbKind::AddHyperedges,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbKind::Clean => "clean",
            PerturbKind::DeleteEdges => "delete_edges",
            PerturbKind::AddEdges => "add_edges",
            PerturbKind::DeleteHyperedges => "delete_hyperedges",
            PerturbKind::AddHyperedges => "add_hyperedges",
        }
    }
}

impl fmt::Display for PerturbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PerturbKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidPerturbation(format!("unknown perturbation kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    pub ratio: f64,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn clean() -> Self {
        Self {
            kind: PerturbKind::Clean,
            ratio: 0.0,
            seed: 0,
        }
    }

    pub fn new(kind: PerturbKind, ratio: f64, seed: u64) -> Result<Self> {
        let spec = Self { kind, ratio, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != PerturbKind::Clean {
            check_ratio(self.ratio)?;
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Column label such as `delete_hyperedges:0.5`, or `clean`.
    pub fn label(&self) -> String {
        match self.kind {
            PerturbKind::Clean => "clean".to_string(),
            kind => format!("{kind}:{}", self.ratio),
        }
    }
}

impl FromStr for PerturbSpec {
    type Err = Error;

    /// Parses `KIND:RATIO` or `clean`. The seed defaults to 0.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, ratio) = match s.split_once(':') {
            Some((k, r)) => {
                let ratio = r
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidPerturbation(format!("bad ratio in `{s}`")))?;
                (k.trim().parse::<PerturbKind>()?, ratio)
            }
            None => (s.trim().parse::<PerturbKind>()?, 0.0),
        };
        if kind != PerturbKind::Clean && !s.contains(':') {
            return Err(Error::InvalidPerturbation(format!("`{s}` needs a ratio, as in {kind}:0.5")));
        }
        PerturbSpec::new(kind, ratio, 0)
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidPerturbation(format!("ratio must lie in (0, 1), got {ratio}")))
    }
}

/// `floor(ratio * m)`. The small offset keeps decimal ratios such as 0.29
/// from losing one item to binary rounding.
pub fn perturb_count(ratio: f64, m: usize) -> usize {
    (ratio * m as f64 + 1e-9).floor() as usize
}

/// Removes `floor(ratio * m)` uniformly chosen hyperedges; survivors keep
/// their order and weights.
pub fn delete_hyperedges(h: &Hypergraph, ratio: f64, rng: &mut Rng) -> Result<Hypergraph> {
    check_ratio(ratio)?;
    let m = h.n_hyperedges();
    let k = perturb_count(ratio, m);
    let removed: BTreeSet<usize> = sample(rng, m, k).into_iter().collect();
    let keep: Vec<usize> = (0..m).filter(|e| !removed.contains(e)).collect();
    Ok(h.select_hyperedges(&keep))
}

pub fn delete_edges(g: &Graph, ratio: f64, rng: &mut Rng) -> Result<Graph> {
    check_ratio(ratio)?;
    let edges: Vec<(usize, usize)> = g.edges().iter().copied().collect();
    let k = perturb_count(ratio, edges.len());
    let removed: BTreeSet<usize> = sample(rng, edges.len(), k).into_iter().collect();
    let kept = edges
        .into_iter()
        .enumerate()
        .filter_map(|(i, e)| (!removed.contains(&i)).then_some(e))
        .collect();
    Ok(g.with_edge_set(kept))
}

/// Adds `floor(ratio * m)` edges drawn uniformly from the unordered pairs of
/// distinct, currently unconnected vertices.
pub fn add_edges(g: &Graph, ratio: f64, rng: &mut Rng) -> Result<Graph> {
    check_ratio(ratio)?;
    let n = g.n_vertices();
    let k = perturb_count(ratio, g.n_edges());
    let total_pairs = n * n.saturating_sub(1) / 2;
    let available = total_pairs - g.n_edges();
    if k > available || (available == 0 && ratio > 0.0) {
        return Err(Error::InsufficientPairs {
            requested: k.max(1),
            available,
        });
    }
    if k == 0 {
        return Ok(g.clone());
    }
    let mut added = BTreeSet::new();
    if 2 * k > available {
        let candidates: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v))
            .collect();
        for i in sample(rng, candidates.len(), k) {
            added.insert(candidates[i]);
        }
    } else {
        while added.len() < k {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u == v {
                continue;
            }
            let pair = (u.min(v), u.max(v));
            if !g.has_edge(pair.0, pair.1) {
                added.insert(pair);
            }
        }
    }
    Ok(g.with_edges(added))
}

/// Appends `floor(ratio * m)` noise hyperedges, each holding one uniformly
/// chosen vertex of every class `0..=max(labels)` with weight 1.
pub fn add_hyperedges(
    h: &Hypergraph,
    labels: &[usize],
    ratio: f64,
    rng: &mut Rng,
) -> Result<Hypergraph> {
    check_ratio(ratio)?;
    let n = h.n_vertices();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} vertices",
            labels.len()
        )));
    }
    let n_classes = labels.iter().max().map_or(0, |&c| c + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (v, &y) in labels.iter().enumerate() {
        by_class[y].push(v);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(empty));
    }
    let k = perturb_count(ratio, h.n_hyperedges());
    let columns: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let mut col = vec![0.0; n];
            for members in &by_class {
                col[members[rng.gen_range(0..members.len())]] = 1.0;
            }
            col
        })
        .collect();
    h.with_extra_hyperedges(&columns)
}

/// Applies a perturbation to a dataset's structure. Graphs are perturbed as
/// graphs; hypergraphs as hypergraphs, where `delete_edges` removes
/// hyperedges and `add_edges` is rejected.
pub fn apply(dataset: &LabeledDataset, spec: &PerturbSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    if spec.kind == PerturbKind::Clean {
        return Ok(dataset.clone());
    }
    let mut rng = seeded(spec.seed);
    let structure = match (&dataset.structure, spec.kind) {
        (Structure::Graph(g), PerturbKind::DeleteEdges) => {
            Structure::Graph(delete_edges(g, spec.ratio, &mut rng)?)
        }
        (Structure::Graph(g), PerturbKind::AddEdges) => {
            Structure::Graph(add_edges(g, spec.ratio, &mut rng)?)
        }
        (Structure::Graph(g), PerturbKind::DeleteHyperedges) => Structure::Hypergraph(
            delete_hyperedges(&g.to_hypergraph(), spec.ratio, &mut rng)?,
        ),
        (Structure::Graph(g), PerturbKind::AddHyperedges) => Structure::Hypergraph(
            add_hyperedges(&g.to_hypergraph(), &dataset.labels, spec.ratio, &mut rng)?,
        ),
        (Structure::Hypergraph(h), PerturbKind::DeleteEdges | PerturbKind::DeleteHyperedges) => {
            Structure::Hypergraph(delete_hyperedges(h, spec.ratio, &mut rng)?)
        }
        (Structure::Hypergraph(h), PerturbKind::AddHyperedges) => Structure::Hypergraph(
            add_hyperedges(h, &dataset.labels, spec.ratio, &mut rng)?,
        ),
        (Structure::Hypergraph(_), PerturbKind::AddEdges) => {
            return Err(Error::InvalidPerturbation(
                "add_edges needs a graph-structured dataset; use add_hyperedges".into(),
            ))
        }
        (_, PerturbKind::Clean) => unreachable!(),
    };
    Ok(LabeledDataset {
        structure,
        ..dataset.clone()
    })
}
