//! Labeled datasets: JSON loading and saving, split generation, and the
//! planted-partition synthetic generator.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::hypergraph::{Graph, Hypergraph, HypergraphFile};
use crate::rng::{Rng, RngExt};

/// Structure of a dataset as it was loaded. Graph-native data stays a graph
/// until converted with [`Structure::to_hypergraph`].
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Graph(Graph),
    Hypergraph(Hypergraph),
}

impl Structure {
    pub fn n_vertices(&self) -> usize {
        match self {
            Structure::Graph(g) => g.n_vertices(),
            Structure::Hypergraph(h) => h.n_vertices(),
        }
    }

    /// One-hop neighbourhood hyperedges for graphs; hypergraphs as is.
    pub fn to_hypergraph(&self) -> Hypergraph {
        match self {
            Structure::Graph(g) => g.to_hypergraph(),
            Structure::Hypergraph(h) => h.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub structure: Structure,
    pub features: Tensor,
    /// Contiguous class indices in `0..n_classes`.
    pub labels: Vec<usize>,
    pub n_classes: usize,
    /// Original label value of each class index, as found in the source file.
    pub label_values: Vec<i64>,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

/// Train, validation and test masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

fn mask_from(n: usize, idx: &[usize], what: &str) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in idx {
        if i >= n {
            return Err(Error::Validation(format!("{what} index {i} out of range for {n} nodes")));
        }
        mask[i] = true;
    }
    Ok(mask)
}

impl LabeledDataset {
    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn d_feat(&self) -> usize {
        self.features.cols()
    }

    pub fn hypergraph(&self) -> Hypergraph {
        self.structure.to_hypergraph()
    }

    pub fn mask(&self, name: &str) -> Result<&[bool]> {
        match name {
            "train" => Ok(&self.train_mask),
            "val" | "validation" => Ok(&self.val_mask),
            "test" => Ok(&self.test_mask),
            other => Err(Error::UnknownMask(other.to_string())),
        }
    }

    pub fn with_split(mut self, split: Split) -> Result<Self> {
        self.train_mask = split.train;
        self.val_mask = split.val;
        self.test_mask = split.test;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::Validation("dataset has no nodes".into()));
        }
        if self.features.rows() != n {
            return Err(Error::Validation(format!(
                "{} feature rows for {n} labels",
                self.features.rows()
            )));
        }
        if self.structure.n_vertices() != n {
            return Err(Error::Validation(format!(
                "structure has {} vertices for {n} labels",
                self.structure.n_vertices()
            )));
        }
        if !self.features.is_finite() {
            return Err(Error::Validation("features contain non-finite values".into()));
        }
        if self.n_classes == 0 || self.label_values.len() != self.n_classes {
            return Err(Error::Validation("label alphabet is inconsistent".into()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= self.n_classes) {
            return Err(Error::Validation(format!(
                "label {bad} outside 0..{}",
                self.n_classes
            )));
        }
        for (name, mask) in [
            ("train", &self.train_mask),
            ("val", &self.val_mask),
            ("test", &self.test_mask),
        ] {
            if mask.len() != n {
                return Err(Error::Validation(format!(
                    "{name} mask has {} entries for {n} nodes",
                    mask.len()
                )));
            }
        }
        for i in 0..n {
            let hits = [self.train_mask[i], self.val_mask[i], self.test_mask[i]]
                .iter()
                .filter(|&&b| b)
                .count();
            if hits > 1 {
                return Err(Error::Validation(format!("node {i} is in more than one split")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        file.into_dataset()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&DatasetFile::from_dataset(self)).expect("dataset serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Reads a JSON dataset file. Unreadable files are reported as parse errors
/// naming the path.
pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    LabeledDataset::from_json(&text)
        .map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetFile {
    name: String,
    features: Vec<Vec<f64>>,
    labels: Vec<i64>,
    structure: StructureFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    splits: Option<SplitsFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum StructureFile {
    Graph {
        #[serde(default)]
        n_vertices: Option<usize>,
        edges: Vec<(usize, usize)>,
    },
    Hypergraph(HypergraphFile),
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitsFile {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

impl DatasetFile {
    fn into_dataset(self) -> Result<LabeledDataset> {
        let n = self.labels.len();
        let features = Tensor::from_rows(&self.features)
            .map_err(|e| Error::Validation(format!("features: {e}")))?;
        let structure = match self.structure {
            StructureFile::Graph { n_vertices, edges } => {
                Structure::Graph(Graph::new(n_vertices.unwrap_or(n), edges)?)
            }
            StructureFile::Hypergraph(file) => Structure::Hypergraph(Hypergraph::from_file(&file)?),
        };
        let mut alphabet: BTreeMap<i64, usize> = self.labels.iter().map(|&y| (y, 0)).collect();
        for (i, v) in alphabet.values_mut().enumerate() {
            *v = i;
        }
        let labels = self.labels.iter().map(|y| alphabet[y]).collect();
        let label_values: Vec<i64> = alphabet.keys().copied().collect();
        let (train_mask, val_mask, test_mask) = match &self.splits {
            Some(s) => (
                mask_from(n, &s.train, "train")?,
                mask_from(n, &s.val, "val")?,
                mask_from(n, &s.test, "test")?,
            ),
            None => (vec![false; n], vec![false; n], vec![false; n]),
        };
        let ds = LabeledDataset {
            name: self.name,
            structure,
            features,
            labels,
            n_classes: label_values.len(),
            label_values,
            train_mask,
            val_mask,
            test_mask,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn from_dataset(ds: &LabeledDataset) -> Self {
        let structure = match &ds.structure {
            Structure::Graph(g) => StructureFile::Graph {
                n_vertices: Some(g.n_vertices()),
                edges: g.edges().iter().copied().collect(),
            },
            Structure::Hypergraph(h) => StructureFile::Hypergraph(h.to_file()),
        };
        let any_split = ds
            .train_mask
            .iter()
            .chain(&ds.val_mask)
            .chain(&ds.test_mask)
            .any(|&b| b);
        DatasetFile {
            name: ds.name.clone(),
            features: ds.features.to_rows(),
            labels: ds.labels.iter().map(|&y| ds.label_values[y]).collect(),
            structure,
            splits: any_split.then(|| SplitsFile {
                train: indices(&ds.train_mask),
                val: indices(&ds.val_mask),
                test: indices(&ds.test_mask),
            }),
        }
    }
}

/// Class-balanced training set of `per_class_train` nodes per class, a
/// validation set of `val_size` nodes drawn from the remainder, and the rest
/// as test nodes.
pub fn make_split(
    labels: &[usize],
    n_classes: usize,
    per_class_train: usize,
    val_size: usize,
    rng: &mut Rng,
) -> Result<Split> {
    let n = labels.len();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= n_classes {
            return Err(Error::Validation(format!("label {y} outside 0..{n_classes}")));
        }
        by_class[y].push(i);
    }
    let mut train = vec![false; n];
    let mut rest = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.len() < per_class_train {
            return Err(Error::ClassTooSmall {
                class,
                requested: per_class_train,
                available: members.len(),
            });
        }
        members.shuffle(rng);
        for &i in &members[..per_class_train] {
            train[i] = true;
        }
        rest.extend_from_slice(&members[per_class_train..]);
    }
    if val_size > rest.len() {
        return Err(Error::Validation(format!(
            "validation size {val_size} exceeds the {} non-training nodes",
            rest.len()
        )));
    }
    rest.sort_unstable();
    rest.shuffle(rng);
    let val = mask_from(n, &rest[..val_size], "val")?;
    let test = mask_from(n, &rest[val_size..], "test")?;
    Ok(Split { train, val, test })
}

/// Parameters of the planted-partition generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n_per_class: usize,
    pub n_classes: usize,
    pub d_feat: usize,
    pub edges_per_class: usize,
    pub noise_sigma: f64,
    pub min_edge_size: usize,
    pub max_edge_size: usize,
    pub train_per_class: usize,
    pub val_per_class: usize,
}

impl Default for PlantedConfig {
    /// Three classes of 40 nodes. `noise_sigma` is set so that a
    /// features-only logistic regression lands in the 60-75% range.
    fn default() -> Self {
        Self {
            n_per_class: 40,
            n_classes: 3,
            d_feat: 16,
            edges_per_class: 10,
            noise_sigma: 2.0,
            min_edge_size: 4,
            max_edge_size: 8,
            train_per_class: 10,
            val_per_class: 10,
        }
    }
}

/// Planted-partition dataset: Gaussian features around per-class means and
/// class-pure hyperedges, each an independent uniform subset of one class.
/// Nodes missed by every subset are isolated in the initial structure.
pub fn synth_planted(cfg: &PlantedConfig, rng: &mut Rng) -> Result<LabeledDataset> {
    if cfg.n_per_class == 0 || cfg.n_classes == 0 || cfg.d_feat == 0 {
        return Err(Error::InvalidConfig("planted sizes must be positive".into()));
    }
    if cfg.min_edge_size == 0 || cfg.min_edge_size > cfg.max_edge_size {
        return Err(Error::InvalidConfig("invalid hyperedge size range".into()));
    }
    if cfg.noise_sigma < 0.0 || !cfg.noise_sigma.is_finite() {
        return Err(Error::InvalidConfig("noise_sigma must be non-negative".into()));
    }
    if cfg.train_per_class + cfg.val_per_class > cfg.n_per_class {
        return Err(Error::InvalidConfig("split larger than class".into()));
    }
    let n = cfg.n_per_class * cfg.n_classes;
    let labels: Vec<usize> = (0..n).map(|i| i / cfg.n_per_class).collect();

    let means: Vec<Vec<f64>> = (0..cfg.n_classes)
        .map(|_| (0..cfg.d_feat).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    let mut features = Tensor::zeros(n, cfg.d_feat);
    for (i, &y) in labels.iter().enumerate() {
        for (f, mu) in features.row_mut(i).iter_mut().zip(&means[y]) {
            let noise: f64 = StandardNormal.sample(rng);
            *f = mu + cfg.noise_sigma * noise;
        }
    }

    let mut hyperedges: Vec<Vec<usize>> = Vec::new();
    for class in 0..cfg.n_classes {
        let offset = class * cfg.n_per_class;
        for _ in 0..cfg.edges_per_class {
            let size = rng
                .gen_range(cfg.min_edge_size..=cfg.max_edge_size)
                .min(cfg.n_per_class);
            let mut edge: Vec<usize> = sample(rng, cfg.n_per_class, size)
                .into_iter()
                .map(|i| offset + i)
                .collect();
            edge.sort_unstable();
            hyperedges.push(edge);
        }
    }
    let structure = Structure::Hypergraph(Hypergraph::from_hyperedges(n, &hyperedges)?);

    let mut train = vec![false; n];
    let mut val = vec![false; n];
    let mut test = vec![false; n];
    for class in 0..cfg.n_classes {
        let mut members: Vec<usize> =
            (class * cfg.n_per_class..(class + 1) * cfg.n_per_class).collect();
        members.shuffle(rng);
        for (k, &i) in members.iter().enumerate() {
            if k < cfg.train_per_class {
                train[i] = true;
            } else if k < cfg.train_per_class + cfg.val_per_class {
                val[i] = true;
            } else {
                test[i] = true;
            }
        }
    }

    let ds = LabeledDataset {
        name: format!("planted-{}x{}", cfg.n_classes, cfg.n_per_class),
        structure,
        features,
        labels,
        n_classes: cfg.n_classes,
        label_values: (0..cfg.n_classes as i64).collect(),
        train_mask: train,
        val_mask: val,
        test_mask: test,
    };
    ds.validate()?;
    Ok(ds)
}
