use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use expr_ensemble::fusion::{score_weights, WeightGrid};
use expr_ensemble::io;
use expr_ensemble::metrics::evaluate;
use expr_ensemble::pipeline::{run_pipeline, RunConfig, SourceMode};
use expr_ensemble::synthetic::{generate_synthetic, write_synthetic, SyntheticSpec};
use expr_ensemble::trainer::{predict, train, TrainConfig};
use expr_ensemble::{
    fold_view, fuse_across_folds, fuse_within_fold, preset, search_weights, split_five_fold, Error,
    FocalLossParams, FusionWeights, LabeledSample, PredictionMatrix, Result,
};

#[derive(Parser)]
#[command(
    name = "expr-ensemble",
    version,
    about = "Multi-model, multi-fold expression-recognition ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and simulated prediction sources.
    Gen(GenArgs),
    /// Split a dataset into video-grouped, stratified folds.
    Split(SplitArgs),
    /// Train a linear-softmax model with focal loss.
    Train(TrainArgs),
    /// Write a model's per-frame class probabilities.
    Predict(PredictArgs),
    /// Weighted soft-voting fusion of prediction files.
    Fuse(FuseArgs),
    /// Search fusion weights that maximize macro-F1.
    Search(SearchArgs),
    /// Score a prediction file against dataset labels.
    Eval(EvalArgs),
    /// Run split, per-fold sources, fusion, evaluation and submission end to end.
    Pipeline(PipelineArgs),
}

/// Restricts a dataset to the held-out frames of one fold.
#[derive(Args)]
struct FoldSelect {
    /// Fold plan produced by `split`.
    #[arg(long, requires = "fold")]
    plan: Option<PathBuf>,
    /// 1-based fold number within `--plan`.
    #[arg(long, requires = "plan")]
    fold: Option<usize>,
}

impl FoldSelect {
    /// `(train, heldout)` views, or `(all, all)` without a plan.
    fn views(
        &self,
        samples: Vec<LabeledSample>,
    ) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
        match (&self.plan, self.fold) {
            (Some(plan), Some(fold)) => {
                let plan = io::read_fold_plan(plan)?;
                let index = fold
                    .checked_sub(1)
                    .ok_or_else(|| Error::InvalidArgument("folds are numbered from 1".into()))?;
                fold_view(&samples, &plan, index)
            }
            _ => Ok((samples.clone(), samples)),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    /// TOML file with generator settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    videos: Option<usize>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// With `--plan`, train on every fold except this one.
    #[command(flatten)]
    select: FoldSelect,
    /// Comma-separated feature indices to train on (default: all).
    #[arg(long, value_delimiter = ',')]
    features: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    min_lr: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Focal balance weight, shared by all classes.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Focal focusing parameter, shared by all classes.
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// With `--plan`, predict only the held-out frames of this fold.
    #[command(flatten)]
    select: FoldSelect,
    /// Feature indices the model was trained on.
    #[arg(long, value_delimiter = ',')]
    features: Vec<usize>,
    /// Source id (default: output file stem).
    #[arg(long)]
    source_id: Option<String>,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// Colon-separated ratios, one per input (e.g. 0.5:1.1:0.5). Equal if omitted.
    #[arg(long, conflicts_with = "preset")]
    weights: Option<FusionWeights>,
    /// Preset method name, e.g. "Fusion 2"; needs `--preset-fold`.
    #[arg(long, requires = "preset_fold")]
    preset: Option<String>,
    #[arg(long)]
    preset_fold: Option<usize>,
    /// Inputs are per-fold ensembles (cross-fold fusion).
    #[arg(long)]
    across: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    submission: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// Dataset providing the labels.
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    select: FoldSelect,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0:2:0.1")]
    grid: String,
    /// Coordinate ascent instead of exhaustive enumeration.
    #[arg(long)]
    coordinate: bool,
    /// Weight record output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    select: FoldSelect,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    submission: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the synthetic benchmark when no config is given.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `train` or `files`.
    #[arg(long)]
    mode: Option<SourceModeArg>,
    /// Per-fold preset method instead of weight search, e.g. "Fusion 2".
    #[arg(long)]
    preset: Option<String>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SourceModeArg {
    Train,
    Files,
}

fn restrict(m: &PredictionMatrix, keep: &[LabeledSample]) -> Result<PredictionMatrix> {
    let wanted: std::collections::HashSet<&str> =
        keep.iter().map(|s| s.frame_id.as_str()).collect();
    let frames: Vec<_> = m
        .frames
        .iter()
        .filter(|f| wanted.contains(f.frame_id.as_str()))
        .cloned()
        .collect();
    if frames.len() != keep.len() {
        return Err(Error::InvalidArgument(format!(
            "{} covers {} of {} selected frames",
            m.source_id,
            frames.len(),
            keep.len()
        )));
    }
    Ok(PredictionMatrix::new(m.source_id.clone(), frames))
}

fn project(samples: Vec<LabeledSample>, features: &[usize]) -> Result<Vec<LabeledSample>> {
    if features.is_empty() {
        return Ok(samples);
    }
    samples
        .into_iter()
        .map(|mut s| {
            let picked = features
                .iter()
                .map(|&i| {
                    s.features.get(i).copied().ok_or_else(|| {
                        Error::InvalidArgument(format!("feature index {i} out of range"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            s.features = picked;
            Ok(s)
        })
        .collect()
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<PredictionMatrix>> {
    paths.iter().map(|p| io::read_predictions(p)).collect()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => {
            let mut spec = match &args.config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    toml::from_str::<SyntheticSpec>(&text)
                        .map_err(|e| Error::InvalidArgument(format!("generator config: {e}")))?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            if let Some(videos) = args.videos {
                spec.videos = videos;
            }
            let data = generate_synthetic(&spec)?;
            let (dataset, sources) = write_synthetic(&data, &args.out)?;
            println!(
                "dataset {} ({} frames)",
                dataset.display(),
                data.samples.len()
            );
            for s in sources {
                println!("source {}", s.display());
            }
        }
        Command::Split(args) => {
            let samples = io::read_dataset(&args.dataset)?;
            let plan = split_five_fold(&samples, args.k, args.seed)?;
            io::write_fold_plan(&plan, &args.out)?;
            println!(
                "{} videos in {} folds -> {}",
                plan.assignment.len(),
                plan.k,
                args.out.display()
            );
        }
        Command::Train(args) => {
            let (train_view, _) = args.select.views(io::read_dataset(&args.dataset)?)?;
            let config = TrainConfig {
                initial_lr: args.lr,
                min_lr: args.min_lr,
                epochs: args.epochs,
                batch_size: args.batch_size,
                loss: FocalLossParams::shared(args.alpha, args.gamma)?,
                shuffle_seed: args.seed,
                ..TrainConfig::default()
            };
            let outcome = train(&project(train_view, &args.features)?, &config)?;
            io::write_model(&outcome.model, &args.out)?;
            if let (Some(first), Some(last)) =
                (outcome.loss_history.first(), outcome.loss_history.last())
            {
                println!(
                    "loss {first} -> {last} over {} epochs",
                    outcome.loss_history.len()
                );
            }
        }
        Command::Predict(args) => {
            let model = io::read_model(&args.model)?;
            let (_, heldout) = args.select.views(io::read_dataset(&args.dataset)?)?;
            let source_id = args.source_id.unwrap_or_else(|| stem(&args.out));
            let m = predict(&model, &project(heldout, &args.features)?, &source_id)?;
            io::write_predictions(&m, &args.out)?;
            println!("{} frames -> {}", m.len(), args.out.display());
        }
        Command::Fuse(args) => {
            let sources = read_all(&args.inputs)?;
            let weights = match (&args.weights, &args.preset, args.preset_fold) {
                (Some(w), _, _) => Some(w.clone()),
                (None, Some(method), Some(fold)) => Some(preset(method, fold)?.weights.clone()),
                _ => None,
            };
            let fused = if args.across {
                fuse_across_folds(&sources, weights.as_ref())?
            } else {
                let w = match weights {
                    Some(w) => w,
                    None => FusionWeights::equal(sources.len())?,
                };
                fuse_within_fold(&sources, &w)?
            };
            io::write_predictions(&fused, &args.out)?;
            if let Some(path) = &args.submission {
                io::write_submission(&fused, path)?;
            }
            println!("{} frames -> {}", fused.len(), args.out.display());
        }
        Command::Search(args) => {
            let (_, heldout) = args.select.views(io::read_dataset(&args.dataset)?)?;
            let sources = read_all(&args.inputs)?
                .iter()
                .map(|m| restrict(m, &heldout))
                .collect::<Result<Vec<_>>>()?;
            let grid = WeightGrid::parse(&args.grid, !args.coordinate)?;
            let outcome = search_weights(&sources, &heldout, &grid)?;
            let equal = score_weights(&sources, &heldout, &FusionWeights::equal(sources.len())?)?;
            let record = format!(
                "sources = {}\nweights = {}\nmacro_f1 = {}\nequal_weights_macro_f1 = {}\nevaluated = {}\n",
                sources.iter().map(|s| s.source_id.as_str()).collect::<Vec<_>>().join(","),
                outcome.weights,
                outcome.report.macro_f1,
                equal.macro_f1,
                outcome.evaluated
            );
            print!("{record}");
            if let Some(path) = &args.out {
                io::write_atomic(path, &record)?;
            }
        }
        Command::Eval(args) => {
            let (_, heldout) = args.select.views(io::read_dataset(&args.dataset)?)?;
            let preds = restrict(&io::read_predictions(&args.predictions)?, &heldout)?;
            let by_frame: std::collections::HashMap<&str, _> = heldout
                .iter()
                .map(|s| (s.frame_id.as_str(), s.label))
                .collect();
            let truth: Vec<_> = preds
                .frames
                .iter()
                .map(|f| by_frame[f.frame_id.as_str()])
                .collect();
            let report = evaluate(&preds.labels(), &truth)?;
            print!("{}", report.to_text());
            if let Some(path) = &args.report {
                io::write_atomic(path, &report.to_text())?;
            }
            if let Some(path) = &args.submission {
                io::write_submission(&preds, path)?;
            }
        }
        Command::Pipeline(args) => {
            let mut config = match &args.config {
                Some(path) => RunConfig::load(path)?,
                None if args.synthetic => RunConfig::synthetic("run", 42, SourceMode::Train),
                None => {
                    return Err(Error::InvalidArgument(
                        "pipeline needs --config or --synthetic".into(),
                    ))
                }
            };
            if let Some(out) = args.out {
                config.output_dir = out;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
                if let Some(spec) = &mut config.synthetic {
                    spec.seed = seed;
                }
            }
            if let Some(mode) = args.mode {
                config.source_mode = match mode {
                    SourceModeArg::Train => SourceMode::Train,
                    SourceModeArg::Files => SourceMode::Files,
                };
            }
            if args.preset.is_some() {
                config.preset = args.preset;
            }
            if args.print_config {
                print!("{}", config.to_toml()?);
                return Ok(());
            }
            let outcome = run_pipeline(&config)?;
            for f in &outcome.folds {
                println!(
                    "fold {}: weights {} heldout macro_f1 {:.4}",
                    f.fold + 1,
                    f.weights,
                    f.report.macro_f1
                );
            }
            for (name, r) in &outcome.source_reports {
                println!("source {name}: macro_f1 {:.4}", r.macro_f1);
            }
            println!(
                "cross-fold ensemble macro_f1 {:.4}",
                outcome.final_report.macro_f1
            );
            println!("submission {}", outcome.artifacts.submission.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
