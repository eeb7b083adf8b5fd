//! Soft-voting fusion of per-frame class distributions.
//!
//! The same weighted-average rule serves both ensemble stages: combining
//! heterogeneous models trained on one fold, and combining the per-fold
//! ensembles into the final prediction. Weights are normalized by their
//! sum, so scaling every weight by the same positive factor never changes
//! a decision.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{macro_f1, ConfusionMatrix, EvalReport};
use crate::model::{
    argmax_scores, validate_prediction_matrix, ExpressionClass, FramePrediction, LabeledSample,
    PredictionMatrix, CLASS_COUNT,
};

/// Source order used by the shipped presets.
pub const PRESET_SOURCES: [&str; 3] = ["InceptionNet-v1", "ResNet50", "EfficientNet-b0"];

/// Upper bound on the number of tuples an exhaustive search will enumerate.
pub const MAX_EXHAUSTIVE_TUPLES: u64 = 50_000_000;

const MAX_REPORTED_IDS: usize = 10;

/// One non-negative weight per prediction source; not all zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FusionWeights(Vec<f64>);

impl FusionWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("fusion weights are empty"));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(format!(
                "fusion weight {i} must be finite and >= 0, got {}",
                weights[i]
            )));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::invalid("fusion weights are all zero"));
        }
        Ok(Self(weights))
    }

    pub fn equal(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for FusionWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FusionWeights> for Vec<f64> {
    fn from(w: FusionWeights) -> Self {
        w.0
    }
}

/// Colon-separated ratios, e.g. `0.5:1.1:0.5`.
impl FromStr for FusionWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(':')
            .map(|part| {
                part.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad weight {part:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

impl fmt::Display for FusionWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            write!(f, "{w}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionPreset {
    pub method: String,
    /// 1-based fold number.
    pub fold: usize,
    pub weights: FusionWeights,
    pub reported_f1: f64,
}

impl FusionPreset {
    pub fn name(&self) -> String {
        format!("{} / Fold {}", self.method, self.fold)
    }
}

const PRESET_DATA: &str = include_str!("../data/fusion_presets.csv");
const SINGLE_MODEL_DATA: &str = include_str!("../data/single_model_f1.csv");

fn data_rows(data: &str) -> impl Iterator<Item = Vec<&str>> {
    data.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::trim).collect())
}

/// The fifteen shipped presets (three methods by five folds).
pub fn preset_catalog() -> &'static [FusionPreset] {
    static CATALOG: OnceLock<Vec<FusionPreset>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        data_rows(PRESET_DATA)
            .map(|cols| {
                let num = |i: usize| cols[i].parse::<f64>().expect("preset data is numeric");
                FusionPreset {
                    method: cols[0].to_string(),
                    fold: cols[1].parse().expect("preset fold"),
                    weights: FusionWeights::new(vec![num(2), num(3), num(4)])
                        .expect("preset weights are valid"),
                    reported_f1: num(5),
                }
            })
            .collect()
    })
}

/// Looks up a preset by method name (`"Fusion 2"`, case-insensitive) and 1-based fold.
pub fn preset(method: &str, fold: usize) -> Result<&'static FusionPreset> {
    let wanted = method.trim();
    preset_catalog()
        .iter()
        .find(|p| p.fold == fold && p.method.eq_ignore_ascii_case(wanted))
        .ok_or_else(|| Error::invalid(format!("no preset {wanted:?} for fold {fold}")))
}

/// Per-fold macro-F1 reported for each single backbone: `(model, [fold1..fold5])`.
pub fn reference_single_model_f1() -> Vec<(String, [f64; 5])> {
    data_rows(SINGLE_MODEL_DATA)
        .map(|cols| {
            let folds = std::array::from_fn(|i| cols[i + 1].parse().expect("numeric"));
            (cols[0].to_string(), folds)
        })
        .collect()
}

/// Candidate values per source for the fusion-weight search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGrid {
    pub values: Vec<f64>,
    /// Full Cartesian enumeration when true, coordinate ascent otherwise.
    pub exhaustive: bool,
}

impl Default for WeightGrid {
    /// `0.0, 0.1, ..., 2.0`, exhaustive.
    fn default() -> Self {
        Self {
            values: (0..=20).map(|i| i as f64 / 10.0).collect(),
            exhaustive: true,
        }
    }
}

impl WeightGrid {
    pub fn new(values: Vec<f64>, exhaustive: bool) -> Result<Self> {
        let grid = Self { values, exhaustive };
        grid.validate()?;
        Ok(grid)
    }

    /// Parses `start:stop:step` (inclusive) or a comma-separated list.
    pub fn parse(spec: &str, exhaustive: bool) -> Result<Self> {
        let bad = || Error::invalid(format!("bad weight grid {spec:?}"));
        let values = if spec.contains(':') {
            let parts: Vec<f64> = spec
                .split(':')
                .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            let [start, stop, step] = parts[..] else {
                return Err(bad());
            };
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + i as f64 * step).collect()
        } else {
            spec.split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_>>()?
        };
        Self::new(values, exhaustive)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("weight grid is empty"));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("weight grid values must be finite and >= 0"));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("weight grid must be strictly increasing"));
        }
        if self.values.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("weight grid has no positive value"));
        }
        Ok(())
    }
}

/// Weighted average of one frame's rows, written into `out`.
#[inline]
fn fuse_row(
    rows: &[&[f64; CLASS_COUNT]],
    weights: &[f64],
    total: f64,
    out: &mut [f64; CLASS_COUNT],
) {
    for i in 0..CLASS_COUNT {
        let mut acc = 0.0;
        for (row, &w) in rows.iter().zip(weights) {
            acc += w * row[i];
        }
        out[i] = acc / total;
    }
}

fn sum_weights(weights: &[f64]) -> f64 {
    weights.iter().fold(0.0, |acc, &w| acc + w)
}

/// Validates every source and returns, per source, the row index of each
/// frame of the first source.
fn align(sources: &[PredictionMatrix]) -> Result<(Vec<PredictionMatrix>, Vec<Vec<usize>>)> {
    if sources.is_empty() {
        return Err(Error::invalid("fusion needs at least one source"));
    }
    let sources: Vec<PredictionMatrix> = sources
        .iter()
        .cloned()
        .map(validate_prediction_matrix)
        .collect::<Result<_>>()?;
    let reference = &sources[0];
    let mut rows = Vec::with_capacity(sources.len());
    for src in &sources {
        let index: HashMap<&str, usize> = src
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| (f.frame_id.as_str(), i))
            .collect();
        let mapped: Option<Vec<usize>> = reference
            .frame_ids()
            .map(|id| index.get(id).copied())
            .collect();
        match mapped {
            Some(m) if src.len() == reference.len() => rows.push(m),
            _ => {
                return Err(Error::FrameMismatch {
                    ids: symmetric_difference(reference, src),
                })
            }
        }
    }
    Ok((sources, rows))
}

fn symmetric_difference(a: &PredictionMatrix, b: &PredictionMatrix) -> Vec<String> {
    let in_a: HashSet<&str> = a.frame_ids().collect();
    let in_b: HashSet<&str> = b.frame_ids().collect();
    a.frame_ids()
        .filter(|id| !in_b.contains(id))
        .chain(b.frame_ids().filter(|id| !in_a.contains(id)))
        .take(MAX_REPORTED_IDS)
        .map(str::to_string)
        .collect()
}

/// Weighted soft voting over models that were trained on the same fold.
pub fn fuse_within_fold(
    sources: &[PredictionMatrix],
    weights: &FusionWeights,
) -> Result<PredictionMatrix> {
    if weights.len() != sources.len() {
        return Err(Error::LengthMismatch {
            what: "fusion weights vs sources",
            left: weights.len(),
            right: sources.len(),
        });
    }
    let (sources, index) = align(sources)?;
    let w = weights.as_slice();
    let total = sum_weights(w);
    let frames = sources[0]
        .frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let rows: Vec<&[f64; CLASS_COUNT]> = sources
                .iter()
                .zip(&index)
                .map(|(src, idx)| &src.frames[idx[i]].probs)
                .collect();
            let mut probs = [0.0; CLASS_COUNT];
            fuse_row(&rows, w, total, &mut probs);
            FramePrediction {
                frame_id: frame.frame_id.clone(),
                video_id: frame.video_id.clone(),
                probs,
            }
        })
        .collect();
    let source_id = format!(
        "fused({})",
        sources
            .iter()
            .map(|s| s.source_id.as_str())
            .collect::<Vec<_>>()
            .join("+")
    );
    Ok(PredictionMatrix::new(source_id, frames))
}

/// Combines the per-fold ensembles; equal weights unless given.
pub fn fuse_across_folds(
    fold_outputs: &[PredictionMatrix],
    weights: Option<&FusionWeights>,
) -> Result<PredictionMatrix> {
    let equal;
    let weights = match weights {
        Some(w) => w,
        None => {
            equal = FusionWeights::equal(fold_outputs.len().max(1))?;
            &equal
        }
    };
    fuse_within_fold(fold_outputs, weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub weights: FusionWeights,
    pub report: EvalReport,
    /// Number of weight tuples scored.
    pub evaluated: u64,
}

/// Labeled rows gathered once so each tuple is scored without lookups.
struct SearchProblem {
    sources: usize,
    /// `rows[frame * sources + source]`
    rows: Vec<[f64; CLASS_COUNT]>,
    labels: Vec<ExpressionClass>,
}

impl SearchProblem {
    fn build(sources: &[PredictionMatrix], labels: &[LabeledSample]) -> Result<Self> {
        let (sources, index) = align(sources)?;
        if labels.is_empty() {
            return Err(Error::invalid(
                "weight search needs at least one labeled frame",
            ));
        }
        let position: HashMap<&str, usize> = sources[0]
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| (f.frame_id.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(labels.len() * sources.len());
        let mut seen = HashSet::with_capacity(labels.len());
        for s in labels {
            if !seen.insert(s.frame_id.as_str()) {
                return Err(Error::DuplicateFrame(s.frame_id.clone()));
            }
            let &i = position.get(s.frame_id.as_str()).ok_or_else(|| {
                Error::invalid(format!("labeled frame {:?} has no prediction", s.frame_id))
            })?;
            for (src, idx) in sources.iter().zip(&index) {
                rows.push(src.frames[idx[i]].probs);
            }
        }
        Ok(Self {
            sources: sources.len(),
            rows,
            labels: labels.iter().map(|s| s.label).collect(),
        })
    }

    fn confusion(&self, weights: &[f64]) -> ConfusionMatrix {
        let total = sum_weights(weights);
        let mut cm = ConfusionMatrix::default();
        let mut fused = [0.0; CLASS_COUNT];
        let mut refs: Vec<&[f64; CLASS_COUNT]> = Vec::with_capacity(self.sources);
        for (frame, &label) in self.rows.chunks_exact(self.sources).zip(&self.labels) {
            refs.clear();
            refs.extend(frame.iter());
            fuse_row(&refs, weights, total, &mut fused);
            cm.add(label, argmax_scores(&fused));
        }
        cm
    }

    fn score(&self, weights: &[f64]) -> f64 {
        macro_f1(&self.confusion(weights))
    }
}

/// Decodes tuple `index` in lexicographic order (first source most significant).
fn tuple_indices(mut index: u64, base: u64, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = (index % base) as usize;
        index /= base;
    }
    out
}

fn to_weights(grid: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| grid[i]).collect()
}

/// Higher score wins; equal scores resolve to the lexicographically smaller tuple.
fn better(a: (f64, Vec<usize>), b: (f64, Vec<usize>)) -> (f64, Vec<usize>) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Searches fusion weights that maximize macro-F1 of the fused decisions
/// on `labels` (matched to prediction rows by frame id).
pub fn search_weights(
    sources: &[PredictionMatrix],
    labels: &[LabeledSample],
    grid: &WeightGrid,
) -> Result<SearchOutcome> {
    grid.validate()?;
    let problem = SearchProblem::build(sources, labels)?;
    let g = &grid.values;
    let (best_idx, evaluated) = if grid.exhaustive {
        exhaustive(&problem, g)?
    } else {
        coordinate_ascent(&problem, g)
    };
    let weights = to_weights(g, &best_idx);
    let report = EvalReport::from_confusion(&problem.confusion(&weights));
    Ok(SearchOutcome {
        weights: FusionWeights::new(weights)?,
        report,
        evaluated,
    })
}

fn exhaustive(problem: &SearchProblem, grid: &[f64]) -> Result<(Vec<usize>, u64)> {
    let base = grid.len() as u64;
    let tuples = u32::try_from(problem.sources)
        .ok()
        .and_then(|s| base.checked_pow(s))
        .filter(|&n| n <= MAX_EXHAUSTIVE_TUPLES)
        .ok_or_else(|| {
            Error::invalid(format!(
                "exhaustive grid of {base}^{} tuples is too large; use coordinate ascent",
                problem.sources
            ))
        })?;
    let zero_first = grid[0] == 0.0;
    let first = u64::from(zero_first);
    let best = (first..tuples)
        .into_par_iter()
        .map(|i| {
            let idx = tuple_indices(i, base, problem.sources);
            (problem.score(&to_weights(grid, &idx)), idx)
        })
        .reduce_with(better)
        .ok_or_else(|| Error::invalid("weight grid yields no valid tuple"))?;
    Ok((best.1, tuples - first))
}

fn coordinate_ascent(problem: &SearchProblem, grid: &[f64]) -> (Vec<usize>, u64) {
    let start = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
        .map(|(i, _)| i)
        .expect("grid validated non-empty");
    let start = if grid[start] == 0.0 {
        grid.len() - 1
    } else {
        start
    };
    let mut current = vec![start; problem.sources];
    let mut current_score = problem.score(&to_weights(grid, &current));
    let mut evaluated = 1;
    loop {
        let mut improved = false;
        for s in 0..problem.sources {
            let candidates: Vec<Vec<usize>> = (0..grid.len())
                .map(|g| {
                    let mut idx = current.clone();
                    idx[s] = g;
                    idx
                })
                .filter(|idx| idx.iter().any(|&i| grid[i] != 0.0))
                .collect();
            evaluated += candidates.len() as u64;
            let best = candidates
                .into_par_iter()
                .map(|idx| (problem.score(&to_weights(grid, &idx)), idx))
                .reduce_with(better);
            if let Some((score, idx)) = best {
                if score > current_score {
                    current = idx;
                    current_score = score;
                    improved = true;
                }
            }
        }
        if !improved {
            return (current, evaluated);
        }
    }
}

/// Macro-F1 of the fused decisions at fixed `weights`.
pub fn score_weights(
    sources: &[PredictionMatrix],
    labels: &[LabeledSample],
    weights: &FusionWeights,
) -> Result<EvalReport> {
    if weights.len() != sources.len() {
        return Err(Error::LengthMismatch {
            what: "fusion weights vs sources",
            left: weights.len(),
            right: sources.len(),
        });
    }
    let problem = SearchProblem::build(sources, labels)?;
    Ok(EvalReport::from_confusion(
        &problem.confusion(weights.as_slice()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(k: usize) -> [f64; CLASS_COUNT] {
        let mut v = [0.0; CLASS_COUNT];
        v[k] = 1.0;
        v
    }

    fn matrix(id: &str, rows: &[(&str, [f64; CLASS_COUNT])]) -> PredictionMatrix {
        PredictionMatrix::new(
            id,
            rows.iter()
                .map(|(f, p)| FramePrediction {
                    frame_id: f.to_string(),
                    video_id: "v".into(),
                    probs: *p,
                })
                .collect(),
        )
    }

    #[test]
    fn equal_weights_average() {
        let s = [
            matrix("a", &[("f", one_hot(0))]),
            matrix("b", &[("f", one_hot(1))]),
            matrix("c", &[("f", one_hot(1))]),
        ];
        let fused = fuse_within_fold(&s, &"1:1:1".parse().unwrap()).unwrap();
        let row = fused.frames[0].probs;
        assert!((row[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((row[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(fused.labels(), vec![ExpressionClass::Disgust]);
    }

    #[test]
    fn single_weight_is_identity() {
        let p = [0.1, 0.2, 0.05, 0.05, 0.3, 0.1, 0.1, 0.1];
        let s = [
            matrix("a", &[("f", p)]),
            matrix("b", &[("f", one_hot(3))]),
            matrix("c", &[("f", one_hot(4))]),
        ];
        let fused =
            fuse_within_fold(&s, &FusionWeights::new(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(fused.frames[0].probs, p);
    }

    #[test]
    fn presets_match_reported_table() {
        assert_eq!(preset_catalog().len(), 15);
        assert_eq!(
            preset("Fusion 2", 1).unwrap().weights.as_slice(),
            &[0.5, 1.1, 0.5]
        );
        assert_eq!(
            preset("fusion 3", 3).unwrap().weights.as_slice(),
            &[0.5, 0.0, 2.0]
        );
        assert_eq!(
            preset("Fusion 1", 4).unwrap().weights.as_slice(),
            &[1.0, 1.0, 1.0]
        );
        assert_eq!(preset("Fusion 2", 5).unwrap().reported_f1, 0.331);
        assert!(preset("Fusion 4", 1).is_err());
        assert!(preset("Fusion 1", 6).is_err());
        let single = reference_single_model_f1();
        assert_eq!(single.len(), 3);
        assert_eq!(single[0].0, "ResNet50");
        assert_eq!(single[0].1[0], 0.317);
    }

    #[test]
    fn weights_parse_and_display() {
        let w: FusionWeights = "0.5:1.1:0.5".parse().unwrap();
        assert_eq!(w.to_string(), "0.5:1.1:0.5");
        assert!("0:0".parse::<FusionWeights>().is_err());
        assert!("1:-1".parse::<FusionWeights>().is_err());
        assert!("1:x".parse::<FusionWeights>().is_err());
    }

    #[test]
    fn grid_parse() {
        let g = WeightGrid::parse("0:2:0.1", true).unwrap();
        assert_eq!(g.values.len(), 21);
        assert_eq!(WeightGrid::default().values[11], 1.1);
        assert_eq!(
            WeightGrid::parse("0,1", true).unwrap().values,
            vec![0.0, 1.0]
        );
        assert!(WeightGrid::parse("1,0", true).is_err());
        assert!(WeightGrid::parse("0", true).is_err());
        assert!(WeightGrid::new(vec![], true).is_err());
    }

    #[test]
    fn mismatched_frames_are_reported() {
        let s = [
            matrix("a", &[("f1", one_hot(0)), ("f2", one_hot(0))]),
            matrix("b", &[("f1", one_hot(0)), ("f3", one_hot(0))]),
        ];
        match fuse_across_folds(&s, None) {
            Err(Error::FrameMismatch { ids }) => assert_eq!(ids, vec!["f2", "f3"]),
            other => panic!("{other:?}"),
        }
        assert!(fuse_within_fold(&s[..1], &FusionWeights::equal(2).unwrap()).is_err());
        assert!(fuse_within_fold(&[], &FusionWeights::equal(1).unwrap()).is_err());
    }

    #[test]
    fn across_folds_mean() {
        let a = [0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let b = [0.1, 0.3, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0];
        let s = [matrix("f0", &[("x", a)]), matrix("f1", &[("x", b)])];
        let fused = fuse_across_folds(&s, None).unwrap();
        for i in 0..8 {
            assert!((fused.frames[0].probs[i] - (a[i] + b[i]) / 2.0).abs() < 1e-15);
        }
        let same = fuse_across_folds(&[s[0].clone(), s[0].clone(), s[0].clone()], None).unwrap();
        assert_eq!(same.frames[0].probs, a);
    }

    fn labeled(frame: &str, label: usize) -> LabeledSample {
        LabeledSample {
            frame_id: frame.into(),
            video_id: "v".into(),
            features: vec![0.0],
            label: ExpressionClass::from_index(label).unwrap(),
        }
    }

    #[test]
    fn single_source_search() {
        let s = [matrix(
            "a",
            &[("f1", one_hot(0)), ("f2", one_hot(1)), ("f3", one_hot(1))],
        )];
        let labels = [labeled("f1", 0), labeled("f2", 1), labeled("f3", 0)];
        let out = search_weights(&s, &labels, &WeightGrid::default()).unwrap();
        // every positive weight ties; the lexicographically smallest wins
        assert_eq!(out.weights.as_slice(), &[0.1]);
        assert!((out.report.macro_f1 - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(out.evaluated, 20);
    }

    #[test]
    fn search_rejects_unknown_labels() {
        let s = [matrix("a", &[("f1", one_hot(0))])];
        assert!(search_weights(&s, &[labeled("zz", 0)], &WeightGrid::default()).is_err());
        assert!(search_weights(&s, &[], &WeightGrid::default()).is_err());
    }

    #[test]
    fn coordinate_ascent_not_worse_than_equal() {
        let s = [
            matrix("a", &[("f1", one_hot(0)), ("f2", one_hot(2))]),
            matrix("b", &[("f1", one_hot(1)), ("f2", one_hot(2))]),
            matrix("c", &[("f1", one_hot(1)), ("f2", one_hot(3))]),
        ];
        let labels = [labeled("f1", 0), labeled("f2", 3)];
        let grid = WeightGrid::parse("0:2:0.5", false).unwrap();
        let out = search_weights(&s, &labels, &grid).unwrap();
        let base = score_weights(&s, &labels, &FusionWeights::equal(3).unwrap()).unwrap();
        assert!(out.report.macro_f1 >= base.macro_f1);
        let full = search_weights(
            &s,
            &labels,
            &WeightGrid {
                exhaustive: true,
                ..grid
            },
        )
        .unwrap();
        assert!(full.report.macro_f1 >= out.report.macro_f1);
    }
}
