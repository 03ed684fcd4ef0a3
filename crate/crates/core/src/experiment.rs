//! Experiment grids: model variants crossed with structure perturbations or
//! hyperparameter ranges, each cell averaged over seeds.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::TrainConfig;
use crate::perturb::{apply, PerturbSpec};
use crate::train::{run_once, RunResult, SeedSummary};

/// Model variants compared in ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Configured alpha and beta.
    Hib,
    /// Cross-entropy only (`beta = 0`).
    HibCe,
    /// Initial structure only (`alpha = 1`, `beta = 0`).
    Fixed,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Hib, Variant::HibCe, Variant::Fixed];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hib => "hib",
            Variant::HibCe => "hib_ce",
            Variant::Fixed => "fixed",
        }
    }

    pub fn apply(self, cfg: &TrainConfig) -> TrainConfig {
        match self {
            Variant::Hib => cfg.clone(),
            Variant::HibCe => TrainConfig { beta: 0.0, ..cfg.clone() },
            Variant::Fixed => TrainConfig {
                alpha: 1.0,
                beta: 0.0,
                ..cfg.clone()
            },
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

/// Hyperparameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperparameter {
    Alpha,
    Beta,
    Epsilon,
    Layers,
}

impl Hyperparameter {
    pub fn name(self) -> &'static str {
        match self {
            Hyperparameter::Alpha => "alpha",
            Hyperparameter::Beta => "beta",
            Hyperparameter::Epsilon => "epsilon",
            Hyperparameter::Layers => "layers",
        }
    }

    pub fn set(self, cfg: &TrainConfig, value: f64) -> Result<TrainConfig> {
        let mut out = cfg.clone();
        match self {
            Hyperparameter::Alpha => out.alpha = value,
            Hyperparameter::Beta => out.beta = value,
            Hyperparameter::Epsilon => out.epsilon = value,
            Hyperparameter::Layers => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidConfig(format!("layer count must be a positive integer, got {value}")));
                }
                out.num_layers = value as usize;
            }
        }
        out.validate()?;
        Ok(out)
    }
}

impl FromStr for Hyperparameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Hyperparameter::Alpha),
            "beta" => Ok(Hyperparameter::Beta),
            "epsilon" => Ok(Hyperparameter::Epsilon),
            "layers" | "num_layers" => Ok(Hyperparameter::Layers),
            other => Err(Error::InvalidConfig(format!("cannot vary `{other}`"))),
        }
    }
}

/// Parses `lo:hi:step` into the inclusive grid `lo, lo + step, ..., hi`.
/// Points are rounded to 12 decimals so `0.1:0.9:0.1` yields exactly nine
/// tidy values.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::InvalidConfig(format!("range `{text}` is not lo:hi:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || hi < lo || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Perturbed copy of `dataset` for run `i`, with seed `spec.seed + i`.
pub fn perturbed_for_run(dataset: &LabeledDataset, spec: &PerturbSpec, i: u64) -> Result<LabeledDataset> {
    apply(dataset, &spec.with_seed(spec.seed.wrapping_add(i)))
}

/// Runs `n_seeds` trainings: run `i` uses training seed `cfg.seed + i` on a
/// structure perturbed with seed `perturb.seed + i`.
pub fn run_cell(
    dataset: &LabeledDataset,
    cfg: &TrainConfig,
    perturb: &PerturbSpec,
    n_seeds: usize,
) -> Result<SeedSummary> {
    if n_seeds == 0 {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let runs = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| -> Result<RunResult> {
            let ds = perturbed_for_run(dataset, perturb, i)?;
            let cfg = TrainConfig {
                seed: cfg.seed.wrapping_add(i),
                ..cfg.clone()
            };
            run_once(&ds, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedSummary::from_runs(runs))
}

/// One cell of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: String,
    pub column: String,
    pub config: TrainConfig,
    pub perturb: PerturbSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub summary: SeedSummary,
}

/// Runs all cells with at most `jobs` concurrent workers (0 uses all
/// cores). Results come back in cell order.
pub fn run_grid(
    dataset: &LabeledDataset,
    cells: &[Cell],
    n_seeds: usize,
    jobs: usize,
) -> Result<Vec<CellResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                Ok(CellResult {
                    cell: cell.clone(),
                    summary: run_cell(dataset, &cell.config, &cell.perturb, n_seeds)?,
                })
            })
            .collect()
    })
}

/// Renders a grid as CSV with one row per distinct row label and one
/// column per distinct column label, cells as `mean±std` in percent.
pub fn grid_csv(row_header: &str, results: &[CellResult]) -> String {
    let mut rows: Vec<&str> = Vec::new();
    let mut cols: Vec<&str> = Vec::new();
    for r in results {
        if !rows.contains(&r.cell.row.as_str()) {
            rows.push(&r.cell.row);
        }
        if !cols.contains(&r.cell.column.as_str()) {
            cols.push(&r.cell.column);
        }
    }
    let mut out = String::from(row_header);
    for c in &cols {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for row in &rows {
        out.push_str(row);
        for col in &cols {
            out.push(',');
            if let Some(r) = results
                .iter()
                .find(|r| r.cell.row == *row && r.cell.column == *col)
            {
                out.push_str(&format_mean_std(r.summary.mean, r.summary.std));
            }
        }
        out.push('\n');
    }
    out
}

/// Accuracy pair in percent with two decimals, e.g. `83.50±0.80`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{:.2}±{:.2}", 100.0 * mean, 100.0 * std)
}
