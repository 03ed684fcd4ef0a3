use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hgib_core::data::synth_planted;
use hgib_core::experiment::{
    format_mean_std, grid_csv, parse_range, perturbed_for_run, run_grid, Cell, CellResult,
    Hyperparameter, Variant,
};
use hgib_core::perturb::PerturbKind;
use hgib_core::rng::seeded;
use hgib_core::train::{evaluate, train, RunResult, SeedSummary, TrainingLog};
use hgib_core::{load_dataset, LabeledDataset, ModelParams, PerturbSpec, PlantedConfig, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{AblateArgs, EvaluateArgs, ReplayArgs, SweepArgs, SynthArgs, TrainArgs};
use crate::CliError;

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: PathBuf,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Percent, as `mean±std`.
    pub summary: String,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub wall_clock_secs: f64,
    pub secs_per_epoch: f64,
    pub param_count: usize,
}

/// Everything needed to reproduce a `train` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub dataset: DatasetRef,
    pub config: TrainConfig,
    pub perturb: Option<PerturbSpec>,
    pub seeds: usize,
    pub results: Results,
    pub environment: Environment,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: ModelParams,
}

struct SeedRun {
    params: ModelParams,
    log: TrainingLog,
    result: RunResult,
}

struct Writer {
    written: Vec<PathBuf>,
}

impl Writer {
    fn new() -> Self {
        Self { written: Vec::new() }
    }

    fn write(&mut self, path: PathBuf, contents: &str) -> CliResult<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn check_seeds(seeds: usize) -> CliResult<()> {
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    Ok(())
}

fn with_perturb_seed(spec: Option<PerturbSpec>, seed: u64) -> Option<PerturbSpec> {
    spec.filter(|s| s.kind != PerturbKind::Clean).map(|s| s.with_seed(seed))
}

/// Run `i` trains with seed `cfg.seed + i` on a structure perturbed with
/// seed `perturb.seed + i`.
fn train_runs(
    dataset: &LabeledDataset,
    cfg: &TrainConfig,
    perturb: Option<&PerturbSpec>,
    seeds: usize,
    jobs: usize,
) -> CliResult<Vec<SeedRun>> {
    cfg.validate()?;
    pool(jobs)?.install(|| {
        (0..seeds as u64)
            .into_par_iter()
            .map(|i| {
                let ds = match perturb {
                    Some(spec) => perturbed_for_run(dataset, spec, i)?,
                    None => dataset.clone(),
                };
                let cfg = TrainConfig {
                    seed: cfg.seed.wrapping_add(i),
                    ..cfg.clone()
                };
                let (params, log) = train(&ds, &cfg)?;
                let test_acc = evaluate(&params, &ds, &cfg, "test")?;
                let result = RunResult {
                    seed: cfg.seed,
                    test_acc,
                    best_epoch: log.best_epoch,
                    epochs_run: log.epochs_run(),
                    final_kl: log.last().map_or(f64::NAN, |r| r.kl),
                };
                Ok(SeedRun { params, log, result })
            })
            .collect::<Result<Vec<_>, hgib_core::Error>>()
            .map_err(CliError::from)
    })
}

fn results_of(runs: &[SeedRun]) -> Results {
    let summary = SeedSummary::from_runs(runs.iter().map(|r| r.result.clone()).collect());
    Results {
        accuracies: summary.accuracies(),
        mean: summary.mean,
        std: summary.std,
        summary: format_mean_std(summary.mean, summary.std),
        runs: summary.runs,
    }
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    check_seeds(args.seeds)?;
    let start = Instant::now();
    let dataset = load_dataset(&args.dataset)?;
    let cfg = args.model.config();
    let perturb = with_perturb_seed(args.perturb, args.perturb_seed);
    let runs = train_runs(&dataset, &cfg, perturb.as_ref(), args.seeds, args.out.jobs)?;

    let out = &args.out.out;
    let mut w = Writer::new();
    for run in &runs {
        let dir = if args.seeds == 1 {
            out.clone()
        } else {
            out.join(format!("seed_{}", run.result.seed))
        };
        let run_cfg = TrainConfig {
            seed: run.result.seed,
            ..cfg.clone()
        };
        w.write(dir.join("training_log.csv"), &run.log.to_csv())?;
        w.write(dir.join("layer_log.csv"), &run.log.layer_csv())?;
        w.write(dir.join("mi_log.csv"), &run.log.mi_csv())?;
        let checkpoint = Checkpoint {
            config: run_cfg.clone(),
            params: run.params.clone(),
        };
        w.write(dir.join("checkpoint.json"), &to_json(&checkpoint))?;
        let summary = run.log.summary(&run_cfg, &run.params, run.result.test_acc);
        w.write(dir.join("summary.json"), &to_json(&summary))?;
    }

    let results = results_of(&runs);
    let epochs: usize = runs.iter().map(|r| r.log.epochs_run()).sum();
    let train_secs: f64 = runs.iter().map(|r| r.log.wall_clock_secs).sum();
    let manifest_path = out.join("manifest.json");
    let mut outputs = w.written.clone();
    outputs.push(manifest_path.clone());
    let manifest = RunManifest {
        command: "train".into(),
        dataset: DatasetRef {
            path: args.dataset.clone(),
            name: dataset.name.clone(),
        },
        config: cfg,
        perturb,
        seeds: args.seeds,
        environment: Environment {
            version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_secs: start.elapsed().as_secs_f64(),
            secs_per_epoch: if epochs == 0 { 0.0 } else { train_secs / epochs as f64 },
            param_count: runs[0].params.param_count(),
        },
        results: results.clone(),
        outputs,
    };
    w.write(manifest_path, &to_json(&manifest))?;

    if args.seeds == 1 {
        println!("test accuracy: {:.4}", results.mean);
    } else {
        println!("test accuracy: {} over {} seeds", results.summary, args.seeds);
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let dataset = load_dataset(&args.dataset)?;
    let text = fs::read_to_string(&args.checkpoint).map_err(|e| CliError::io(&args.checkpoint, e))?;
    let checkpoint: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.checkpoint.display())))?;
    let dataset = match with_perturb_seed(args.perturb, args.perturb_seed) {
        Some(spec) => hgib_core::perturb::apply(&dataset, &spec)?,
        None => dataset,
    };
    let acc = evaluate(&checkpoint.params, &dataset, &checkpoint.config, &args.mask)?;
    println!("{} accuracy: {acc:.4}", args.mask);
    Ok(())
}

fn variants(names: &[String]) -> CliResult<Vec<Variant>> {
    if names.is_empty() {
        return Err(CliError::Usage("--models needs at least one variant".into()));
    }
    names
        .iter()
        .map(|n| n.trim().parse::<Variant>().map_err(CliError::from))
        .collect()
}

fn perturbation_columns(
    kinds: &[PerturbKind],
    ratios: &[f64],
    seed: u64,
    clean: bool,
) -> CliResult<Vec<PerturbSpec>> {
    let mut cols = Vec::new();
    if clean {
        cols.push(PerturbSpec::clean().with_seed(seed));
    }
    for &kind in kinds {
        for &ratio in ratios {
            cols.push(PerturbSpec::new(kind, ratio, seed)?);
        }
    }
    Ok(cols)
}

fn grid_cells(cfg: &TrainConfig, models: &[Variant], columns: &[PerturbSpec]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &v in models {
        for spec in columns {
            cells.push(Cell {
                row: v.name().into(),
                column: spec.label(),
                config: v.apply(cfg),
                perturb: *spec,
            });
        }
    }
    cells
}

fn long_csv(results: &[CellResult]) -> String {
    let mut out = String::from("model,setting,mean,std\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.cell.row,
            r.cell.column,
            100.0 * r.summary.mean,
            100.0 * r.summary.std
        );
    }
    out
}

fn grid_gnuplot(stem: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 900,500\n\
         set output '{stem}.png'\n\
         set ylabel 'test accuracy (%)'\n\
         set style data histograms\n\
         set style histogram errorbars gap 1 lw 1\n\
         set style fill solid 0.6\n\
         set xtics rotate by -30\n\
         set key outside\n\
         plot '{stem}_long.csv' every ::1 using 3:4:xtic(sprintf('%s %s', strcol(1), strcol(2))) title 'mean ± std'\n"
    )
}

fn curve_gnuplot(stem: &str, name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 700,450\n\
         set output '{stem}.png'\n\
         set xlabel '{name}'\n\
         set ylabel 'test accuracy (%)'\n\
         plot '{stem}.csv' every ::1 using 1:2:3 with yerrorlines title 'mean ± std'\n"
    )
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    check_seeds(args.seeds)?;
    let cfg = args.model.config();
    cfg.validate()?;
    let out = &args.out.out;
    let mut w = Writer::new();

    if let Some(name) = &args.vary {
        let param: Hyperparameter = name.parse()?;
        let range = args.range.as_deref().expect("clap requires --range with --vary");
        let values = parse_range(range)?;
        let dataset = load_dataset(&args.dataset)?;
        let cells = values
            .iter()
            .map(|&v| {
                Ok(Cell {
                    row: v.to_string(),
                    column: "accuracy".into(),
                    config: param.set(&cfg, v)?,
                    perturb: PerturbSpec::clean(),
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let results = run_grid(&dataset, &cells, args.seeds, args.out.jobs)?;
        let mut csv = format!("{},mean,std\n", param.name());
        for r in &results {
            let _ = writeln!(
                csv,
                "{},{},{}",
                r.cell.row,
                100.0 * r.summary.mean,
                100.0 * r.summary.std
            );
        }
        let stem = format!("sweep_{}", param.name());
        w.write(out.join(format!("{stem}.csv")), &csv)?;
        if args.gnuplot_script {
            w.write(out.join(format!("{stem}.gp")), &curve_gnuplot(&stem, param.name()))?;
        }
        w.write(out.join(format!("{stem}.json")), &to_json(&results))?;
        print!("{csv}");
        return Ok(());
    }

    if args.perturb.is_empty() {
        return Err(CliError::Usage("sweep needs --perturb KINDS with --ratios, or --vary with --range".into()));
    }
    if args.ratios.is_empty() {
        return Err(CliError::Usage("--ratios must list at least one ratio".into()));
    }
    let kinds = args
        .perturb
        .iter()
        .map(|k| k.trim().parse::<PerturbKind>())
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.contains(&PerturbKind::Clean) {
        return Err(CliError::Usage("`clean` is a column of every sweep; list perturbation kinds only".into()));
    }
    let models = variants(&args.models)?;
    let columns = perturbation_columns(&kinds, &args.ratios, args.perturb_seed, !args.no_clean)?;
    let dataset = load_dataset(&args.dataset)?;
    let results = run_grid(&dataset, &grid_cells(&cfg, &models, &columns), args.seeds, args.out.jobs)?;
    let csv = grid_csv("model", &results);
    w.write(out.join("sweep.csv"), &csv)?;
    w.write(out.join("sweep_long.csv"), &long_csv(&results))?;
    w.write(out.join("sweep.json"), &to_json(&results))?;
    if args.gnuplot_script {
        w.write(out.join("sweep.gp"), &grid_gnuplot("sweep"))?;
    }
    print!("{csv}");
    Ok(())
}

pub fn cmd_ablate(args: &AblateArgs) -> CliResult<()> {
    check_seeds(args.seeds)?;
    let cfg = args.model.config();
    cfg.validate()?;
    let mut columns = vec![PerturbSpec::clean().with_seed(args.perturb_seed)];
    for spec in &args.perturb {
        if spec.kind != PerturbKind::Clean {
            columns.push(spec.with_seed(args.perturb_seed));
        }
    }
    let dataset = load_dataset(&args.dataset)?;
    let results = run_grid(&dataset, &grid_cells(&cfg, &Variant::ALL, &columns), args.seeds, args.out.jobs)?;
    let csv = grid_csv("model", &results);
    let out = &args.out.out;
    let mut w = Writer::new();
    w.write(out.join("ablation.csv"), &csv)?;
    w.write(out.join("ablation_long.csv"), &long_csv(&results))?;
    w.write(out.join("ablation.json"), &to_json(&results))?;
    if args.gnuplot_script {
        w.write(out.join("ablation.gp"), &grid_gnuplot("ablation"))?;
    }
    print!("{csv}");
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let defaults = PlantedConfig::default();
    let cfg = PlantedConfig {
        n_per_class: args.n_per_class,
        n_classes: args.classes,
        d_feat: args.d_feat,
        edges_per_class: args.edges_per_class,
        noise_sigma: args.sigma.unwrap_or(defaults.noise_sigma),
        ..defaults
    };
    let ds = synth_planted(&cfg, &mut seeded(args.seed))?;
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    ds.save(&args.output)?;
    println!(
        "wrote {} ({} nodes, {} hyperedges, {} classes)",
        args.output.display(),
        ds.n_nodes(),
        ds.hypergraph().n_hyperedges(),
        ds.n_classes
    );
    Ok(())
}

pub fn cmd_replay(args: &ReplayArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.manifest).map_err(|e| CliError::io(&args.manifest, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.manifest.display())))?;
    let dataset = load_dataset(&manifest.dataset.path)?;
    let runs = train_runs(
        &dataset,
        &manifest.config,
        manifest.perturb.as_ref(),
        manifest.seeds,
        args.jobs,
    )?;
    let results = results_of(&runs);
    if results.runs == manifest.results.runs {
        println!("replay matches: {} over {} seeds", results.summary, manifest.seeds);
        Ok(())
    } else {
        Err(CliError::Mismatch(format!(
            "replay gave {} but the manifest records {}",
            results.summary, manifest.results.summary
        )))
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}
