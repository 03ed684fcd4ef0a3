use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hgib_core::{PerturbSpec, Preset, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "hgib", version, about = "Hypergraph structure learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one or more seeds and write logs, checkpoint and manifest.
    Train(TrainArgs),
    /// Score a saved checkpoint on a dataset mask.
    Evaluate(EvaluateArgs),
    /// Perturbation or hyperparameter grid, one CSV cell per setting.
    Sweep(SweepArgs),
    /// Compare the full loss, cross-entropy only and the fixed structure.
    Ablate(AblateArgs),
    /// Write a planted-partition dataset.
    Synth(SynthArgs),
    /// Re-run a manifest and check the results match.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Named hyperparameter row: cora, citeseer, yummly10k, dblp.
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Epoch interval of the mutual-information diagnostic (0 disables).
    #[arg(long)]
    pub mi_every: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn config(&self) -> TrainConfig {
        let mut cfg = self.preset.map(Preset::config).unwrap_or_default();
        macro_rules! set {
            ($($field:ident <- $arg:ident),*) => {
                $(if let Some(v) = self.$arg { cfg.$field = v; })*
            };
        }
        set!(alpha <- alpha, beta <- beta, epsilon <- epsilon, num_layers <- layers,
             heads <- heads, hidden_dim <- hidden, dropout <- dropout, lr <- lr,
             max_epochs <- max_epochs, patience <- patience, mi_every <- mi_every);
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output directory; defaults to $HGIB_OUT_DIR, then `hgib-out`.
    #[arg(long, env = "HGIB_OUT_DIR", default_value = "hgib-out")]
    pub out: PathBuf,
    /// Worker threads for parallel runs (0 uses every core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Structure perturbation as KIND:RATIO, e.g. delete_hyperedges:0.5.
    #[arg(long)]
    pub perturb: Option<PerturbSpec>,
    #[arg(long, default_value_t = 0)]
    pub perturb_seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    pub mask: String,
    #[arg(long)]
    pub perturb: Option<PerturbSpec>,
    #[arg(long, default_value_t = 0)]
    pub perturb_seed: u64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Comma-separated perturbation kinds for a robustness grid.
    #[arg(long, value_delimiter = ',', conflicts_with = "vary")]
    pub perturb: Vec<String>,
    /// Ratios applied to every perturbation kind.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub perturb_seed: u64,
    /// Comma-separated model variants as grid rows: hib, hib_ce, fixed.
    #[arg(long, value_delimiter = ',', default_value = "hib")]
    pub models: Vec<String>,
    /// Skip the unperturbed column.
    #[arg(long)]
    pub no_clean: bool,
    /// Hyperparameter to vary: alpha, beta, epsilon or layers.
    #[arg(long, requires = "range")]
    pub vary: Option<String>,
    /// Grid for --vary as lo:hi:step.
    #[arg(long)]
    pub range: Option<String>,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    pub gnuplot_script: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Perturbations as KIND:RATIO, comma-separated; the clean column is
    /// always included.
    #[arg(long, value_delimiter = ',')]
    pub perturb: Vec<PerturbSpec>,
    #[arg(long, default_value_t = 0)]
    pub perturb_seed: u64,
    #[arg(long)]
    pub gnuplot_script: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Destination dataset file.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub d_feat: usize,
    #[arg(long, default_value_t = 10)]
    pub edges_per_class: usize,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}
