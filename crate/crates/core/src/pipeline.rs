//! End-to-end run: split the pool into folds, obtain per-fold source
//! predictions, fuse within each fold, fuse across folds, evaluate and
//! write the per-frame label sequence.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::focal::FocalLossParams;
use crate::folds::{fold_view, split_five_fold, FoldPlan, DEFAULT_FOLDS};
use crate::fusion::{
    fuse_across_folds, fuse_within_fold, preset, score_weights, search_weights, FusionWeights,
    WeightGrid,
};
use crate::io;
use crate::metrics::{evaluate, EvalReport};
use crate::model::{feature_dim, LabeledSample, PredictionMatrix};
use crate::synthetic::{generate_synthetic, write_synthetic, SyntheticSpec};
use crate::trainer::{predict, train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SourceMode {
    /// Train one linear-softmax model per family on every fold.
    #[default]
    Train,
    /// Use precomputed prediction files (or the synthetic simulated sources).
    Files,
}

/// A trainable prediction source: which feature columns it sees and,
/// optionally, its own loss parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFamily {
    pub name: String,
    /// Feature indices used by this family; empty means all.
    #[serde(default)]
    pub features: Vec<usize>,
    #[serde(default)]
    pub loss: Option<FocalLossParams>,
}

impl SourceFamily {
    fn project(&self, samples: &[LabeledSample]) -> Vec<LabeledSample> {
        if self.features.is_empty() {
            return samples.to_vec();
        }
        samples
            .iter()
            .map(|s| LabeledSample {
                features: self.features.iter().map(|&i| s.features[i]).collect(),
                ..s.clone()
            })
            .collect()
    }
}

/// Three overlapping feature views, one per family, so the trained
/// sources disagree in informative ways.
pub fn default_families(dim: usize) -> Vec<SourceFamily> {
    let family = |name: &str, features: Vec<usize>| SourceFamily {
        name: name.to_string(),
        features,
        loss: None,
    };
    if dim < 3 {
        return ["family_a", "family_b", "family_c"]
            .iter()
            .map(|n| family(n, Vec::new()))
            .collect();
    }
    let two_thirds = (2 * dim).div_ceil(3);
    vec![
        family("family_a", (0..two_thirds).collect()),
        family("family_b", (dim / 3..dim).collect()),
        family("family_c", (0..dim).filter(|i| i % 3 != 1).collect()),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Merged training + validation pool. Generated from `synthetic` when absent.
    pub dataset: Option<PathBuf>,
    /// Frames the final cross-fold ensemble is evaluated on; the pool when absent.
    pub eval_dataset: Option<PathBuf>,
    /// Prediction files, one per source, for `source_mode = "files"`.
    pub predictions: Vec<PathBuf>,
    /// Reuse an existing fold plan instead of splitting.
    pub fold_plan: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub k: usize,
    pub seed: u64,
    pub source_mode: SourceMode,
    pub train: TrainConfig,
    pub families: Vec<SourceFamily>,
    pub grid: WeightGrid,
    /// Fixed per-fold weights by preset method (e.g. `"Fusion 2"`) instead of searching.
    pub preset: Option<String>,
    /// Cross-fold weights; equal when absent.
    pub fold_weights: Option<FusionWeights>,
    pub synthetic: Option<SyntheticSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            eval_dataset: None,
            predictions: Vec::new(),
            fold_plan: None,
            output_dir: PathBuf::from("run"),
            k: DEFAULT_FOLDS,
            seed: 42,
            source_mode: SourceMode::Train,
            train: TrainConfig::default(),
            families: Vec::new(),
            grid: WeightGrid::default(),
            preset: None,
            fold_weights: None,
            synthetic: None,
        }
    }
}

impl RunConfig {
    /// Synthetic benchmark at `seed`, written under `output_dir`.
    pub fn synthetic(output_dir: impl Into<PathBuf>, seed: u64, mode: SourceMode) -> Self {
        Self {
            output_dir: output_dir.into(),
            seed,
            source_mode: mode,
            synthetic: Some(SyntheticSpec {
                seed,
                ..SyntheticSpec::default()
            }),
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::invalid(format!("run config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Invariant(format!("run config encoding: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut paths: Vec<&PathBuf> = self.predictions.iter().collect();
        paths.extend(self.dataset.iter());
        paths.extend(self.eval_dataset.iter());
        paths.extend(self.fold_plan.iter());
        paths.push(&self.output_dir);
        let mut seen = HashSet::new();
        if let Some(dup) = paths.iter().find(|p| !seen.insert(**p)) {
            return Err(Error::invalid(format!(
                "path {} is referenced twice",
                dup.display()
            )));
        }
        if self.k < 2 {
            return Err(Error::invalid(format!("k={} must be >= 2", self.k)));
        }
        if self.dataset.is_none() && self.synthetic.is_none() {
            return Err(Error::invalid(
                "either `dataset` or `synthetic` must be set",
            ));
        }
        if self.source_mode == SourceMode::Files
            && self.predictions.is_empty()
            && self.dataset.is_some()
        {
            return Err(Error::invalid(
                "source_mode = \"files\" needs `predictions`",
            ));
        }
        self.train.validate()?;
        self.grid.validate()?;
        if let Some(spec) = &self.synthetic {
            spec.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub weights: FusionWeights,
    /// Fused decisions on the fold's held-out frames.
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub final_report: EvalReport,
    pub folds: Vec<FoldResult>,
    /// Each source alone (its per-fold outputs averaged across folds) on the evaluation frames.
    pub source_reports: Vec<(String, EvalReport)>,
    pub fused: PredictionMatrix,
    pub artifacts: Artifacts,
}

#[derive(Debug, Clone)]
pub struct Artifacts {
    pub fold_plan: PathBuf,
    pub fold_weights: Vec<PathBuf>,
    pub fold_reports: Vec<PathBuf>,
    pub final_report: PathBuf,
    pub fused_predictions: PathBuf,
    pub submission: PathBuf,
}

fn stage<T>(name: impl Into<String>, result: Result<T>) -> Result<T> {
    result.map_err(|e| Error::Stage {
        stage: name.into(),
        source: Box::new(e),
    })
}

/// Rows of `m` for `samples`, in sample order.
fn restrict(m: &PredictionMatrix, samples: &[LabeledSample]) -> Result<PredictionMatrix> {
    let index: HashMap<&str, usize> = m.frame_ids().enumerate().map(|(i, f)| (f, i)).collect();
    let frames = samples
        .iter()
        .map(|s| {
            index
                .get(s.frame_id.as_str())
                .map(|&i| m.frames[i].clone())
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "source {:?} has no prediction for frame {:?}",
                        m.source_id, s.frame_id
                    ))
                })
        })
        .collect::<Result<_>>()?;
    Ok(PredictionMatrix::new(m.source_id.clone(), frames))
}

enum Sources<'a> {
    Files(Vec<PredictionMatrix>),
    Trained(&'a [SourceFamily]),
}

struct FoldOutput {
    result: FoldResult,
    mode: String,
    source_ids: Vec<String>,
    /// Per-source predictions on the evaluation frames.
    eval_sources: Vec<PredictionMatrix>,
    fused_eval: PredictionMatrix,
}

fn run_fold(
    fold: usize,
    config: &RunConfig,
    pool: &[LabeledSample],
    eval: &[LabeledSample],
    plan: &FoldPlan,
    sources: &Sources<'_>,
) -> Result<FoldOutput> {
    let (train_view, test_view) = fold_view(pool, plan, fold)?;
    if test_view.is_empty() {
        return Err(Error::invalid(format!(
            "fold {fold} has no held-out frames"
        )));
    }
    let (test_sources, eval_sources): (Vec<_>, Vec<_>) = match sources {
        Sources::Files(matrices) => matrices
            .iter()
            .map(|m| Ok((restrict(m, &test_view)?, restrict(m, eval)?)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip(),
        Sources::Trained(families) => families
            .iter()
            .enumerate()
            .map(|(f, family)| {
                let mut train_config = config.train.clone();
                train_config.shuffle_seed = config
                    .train
                    .shuffle_seed
                    .wrapping_add((fold * families.len() + f) as u64);
                if let Some(loss) = family.loss {
                    train_config.loss = loss;
                }
                let outcome = train(&family.project(&train_view), &train_config)?;
                Ok((
                    predict(&outcome.model, &family.project(&test_view), &family.name)?,
                    predict(&outcome.model, &family.project(eval), &family.name)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip(),
    };

    let (weights, report, mode) = match &config.preset {
        Some(method) => {
            let p = preset(method, fold + 1)?;
            let report = score_weights(&test_sources, &test_view, &p.weights)?;
            (p.weights.clone(), report, format!("preset {}", p.name()))
        }
        None => {
            let out = search_weights(&test_sources, &test_view, &config.grid)?;
            let mode = if config.grid.exhaustive {
                "search exhaustive"
            } else {
                "search coordinate"
            };
            (out.weights, out.report, mode.to_string())
        }
    };
    let fused_eval = fuse_within_fold(&eval_sources, &weights)?;
    Ok(FoldOutput {
        result: FoldResult {
            fold,
            weights,
            report,
        },
        mode,
        source_ids: test_sources.iter().map(|m| m.source_id.clone()).collect(),
        eval_sources,
        fused_eval,
    })
}

fn weight_record(out: &FoldOutput) -> String {
    format!(
        "fold = {}\nmode = {}\nsources = {}\nweights = {}\nmacro_f1 = {}\n",
        out.result.fold + 1,
        out.mode,
        out.source_ids.join(","),
        out.result.weights,
        out.result.report.macro_f1
    )
}

fn final_report_text(
    report: &EvalReport,
    folds: &[FoldResult],
    sources: &[(String, EvalReport)],
) -> String {
    let mut out = String::from("# cross-fold ensemble\n");
    out.push_str(&report.to_text());
    out.push_str("\nfold,weights,heldout_macro_f1\n");
    for f in folds {
        writeln!(out, "{},{},{}", f.fold + 1, f.weights, f.report.macro_f1).unwrap();
    }
    out.push_str("\nsource,macro_f1\n");
    for (name, r) in sources {
        writeln!(out, "{name},{}", r.macro_f1).unwrap();
    }
    out
}

pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutcome> {
    stage("config", config.validate())?;
    let out_dir = &config.output_dir;

    let (pool, mut files) = stage("load", {
        match (&config.dataset, &config.synthetic) {
            (Some(path), _) => io::read_dataset(path).map(|d| (d, Vec::new())),
            (None, Some(spec)) => generate_synthetic(spec).and_then(|data| {
                write_synthetic(&data, &out_dir.join("data"))?;
                Ok((data.samples, data.sources))
            }),
            (None, None) => Err(Error::invalid("no dataset")),
        }
    })?;
    let dim = stage("load", feature_dim(&pool))?;
    if !config.predictions.is_empty() {
        files = stage(
            "load",
            config
                .predictions
                .iter()
                .map(|p| io::read_predictions(p))
                .collect(),
        )?;
    }
    let eval = match &config.eval_dataset {
        Some(path) => stage("load", io::read_dataset(path))?,
        None => pool.clone(),
    };

    let plan = stage(
        "split",
        match &config.fold_plan {
            Some(path) => io::read_fold_plan(path),
            None => split_five_fold(&pool, config.k, config.seed),
        },
    )?;
    let plan_path = out_dir.join("fold_plan.csv");
    stage("split", io::write_fold_plan(&plan, &plan_path))?;

    let families;
    let sources = match config.source_mode {
        SourceMode::Files => Sources::Files(files),
        SourceMode::Train => {
            families = if config.families.is_empty() {
                default_families(dim)
            } else {
                config.families.clone()
            };
            if let Some(bad) = families
                .iter()
                .flat_map(|f| &f.features)
                .find(|&&i| i >= dim)
            {
                return stage(
                    "train",
                    Err(Error::invalid(format!(
                        "family feature index {bad} >= dimension {dim}"
                    ))),
                );
            }
            Sources::Trained(&families)
        }
    };

    let fold_outputs: Vec<FoldOutput> = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            stage(
                format!("fold {}", fold + 1),
                run_fold(fold, config, &pool, &eval, &plan, &sources),
            )
        })
        .collect::<Result<_>>()?;

    let mut artifacts = Artifacts {
        fold_plan: plan_path,
        fold_weights: Vec::new(),
        fold_reports: Vec::new(),
        final_report: out_dir.join("final_report.txt"),
        fused_predictions: out_dir.join("fused_predictions.csv"),
        submission: out_dir.join("submission.csv"),
    };
    for out in &fold_outputs {
        let n = out.result.fold + 1;
        let weights_path = out_dir.join(format!("fold{n}_weights.txt"));
        let report_path = out_dir.join(format!("fold{n}_report.txt"));
        stage(
            "write",
            io::write_atomic(&weights_path, &weight_record(out)),
        )?;
        stage(
            "write",
            io::write_atomic(&report_path, &out.result.report.to_text()),
        )?;
        artifacts.fold_weights.push(weights_path);
        artifacts.fold_reports.push(report_path);
    }

    let per_fold: Vec<PredictionMatrix> =
        fold_outputs.iter().map(|o| o.fused_eval.clone()).collect();
    let fused = stage(
        "fuse-across",
        fuse_across_folds(&per_fold, config.fold_weights.as_ref()),
    )?;
    let truth: Vec<_> = eval.iter().map(|s| s.label).collect();
    let final_report = stage("eval", evaluate(&fused.labels(), &truth))?;

    let source_count = fold_outputs[0].eval_sources.len();
    let source_reports = stage(
        "eval",
        (0..source_count)
            .map(|m| {
                let outputs: Vec<PredictionMatrix> = fold_outputs
                    .iter()
                    .map(|o| o.eval_sources[m].clone())
                    .collect();
                let merged = fuse_across_folds(&outputs, None)?;
                Ok((
                    outputs[0].source_id.clone(),
                    evaluate(&merged.labels(), &truth)?,
                ))
            })
            .collect::<Result<Vec<_>>>(),
    )?;

    let folds: Vec<FoldResult> = fold_outputs.into_iter().map(|o| o.result).collect();
    stage(
        "write",
        io::write_atomic(
            &artifacts.final_report,
            &final_report_text(&final_report, &folds, &source_reports),
        ),
    )?;
    stage(
        "write",
        io::write_predictions(&fused, &artifacts.fused_predictions),
    )?;
    stage(
        "submission",
        io::write_submission(&fused, &artifacts.submission),
    )?;

    Ok(PipelineOutcome {
        final_report,
        folds,
        source_reports,
        fused,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let mut config = RunConfig::synthetic("out", 7, SourceMode::Files);
        config.preset = Some("Fusion 2".into());
        config.fold_weights = Some("1:2:1:1:1".parse().unwrap());
        let text = config.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), config);
    }

    #[test]
    fn config_rejects_duplicate_paths() {
        let config = RunConfig {
            dataset: Some("a.csv".into()),
            predictions: vec!["a.csv".into()],
            source_mode: SourceMode::Files,
            ..RunConfig::default()
        };
        assert!(config.validate().is_err());
        assert!(RunConfig::default().validate().is_err());
    }

    #[test]
    fn default_families_cover_distinct_views() {
        let f = default_families(12);
        assert_eq!(f[0].features, (0..8).collect::<Vec<_>>());
        assert_eq!(f[1].features, (4..12).collect::<Vec<_>>());
        assert_eq!(f[2].features, vec![0, 2, 3, 5, 6, 8, 9, 11]);
        assert!(default_families(2).iter().all(|f| f.features.is_empty()));
    }
}
