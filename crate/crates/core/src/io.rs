//! Text formats for datasets, prediction matrices, fold plans, models and
//! submissions. Every writer goes through [`write_atomic`].
//!
//! Reals are written with `{:?}`, the shortest representation that parses
//! back to the same `f64`, so write-then-read is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::folds::FoldPlan;
use crate::model::{
    argmax_scores, validate_prediction_matrix, ExpressionClass, FramePrediction, LabeledSample,
    PredictionMatrix, CLASS_COUNT,
};
use crate::trainer::LinearSoftmaxModel;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_MAGIC: &str = "# expr-ensemble linear-softmax model";

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_string(),
        line,
        message: message.into(),
    }
}

/// Non-empty lines that are not `#` comments, with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_real(origin: &str, line: usize, column: &str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        parse_err(
            origin,
            line,
            format!("field {column}: {raw:?} is not a number"),
        )
    })
}

pub fn prediction_header() -> String {
    format!("frame_id,video_id,{}", ExpressionClass::NAMES.join(","))
}

pub fn format_predictions(m: &PredictionMatrix) -> String {
    let mut out = prediction_header();
    out.push('\n');
    for f in &m.frames {
        write!(out, "{},{}", f.frame_id, f.video_id).unwrap();
        for p in &f.probs {
            write!(out, ",{p:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_predictions(text: &str, origin: &str, source_id: &str) -> Result<PredictionMatrix> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(origin, 1, "missing header"))?;
    let expected = prediction_header();
    if header.trim() != expected {
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let message = if cols.len() == CLASS_COUNT + 2 {
            format!("class columns must be in the order {expected:?}, got {header:?}")
        } else {
            format!("expected header {expected:?}, got {header:?}")
        };
        return Err(parse_err(origin, hline, message));
    }
    let mut frames = Vec::new();
    for (line, row) in lines {
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != CLASS_COUNT + 2 {
            return Err(parse_err(
                origin,
                line,
                format!("expected {} columns, found {}", CLASS_COUNT + 2, cols.len()),
            ));
        }
        let mut probs = [0.0; CLASS_COUNT];
        for (c, p) in probs.iter_mut().enumerate() {
            *p = parse_real(origin, line, ExpressionClass::NAMES[c], cols[c + 2])?;
        }
        frames.push(FramePrediction {
            frame_id: cols[0].trim().to_string(),
            video_id: cols[1].trim().to_string(),
            probs,
        });
    }
    validate_prediction_matrix(PredictionMatrix::new(source_id, frames))
}

pub fn write_predictions(m: &PredictionMatrix, path: &Path) -> Result<()> {
    write_atomic(path, &format_predictions(m))
}

/// Reads a prediction file; the source id is the file stem.
pub fn read_predictions(path: &Path) -> Result<PredictionMatrix> {
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_predictions(&read_text(path)?, &path.display().to_string(), &source_id)
}

pub fn format_dataset(samples: &[LabeledSample]) -> String {
    let dim = samples.first().map_or(0, |s| s.features.len());
    let mut out = String::from("frame_id,video_id,label");
    for d in 0..dim {
        write!(out, ",f{d}").unwrap();
    }
    out.push('\n');
    for s in samples {
        write!(out, "{},{},{}", s.frame_id, s.video_id, s.label.index()).unwrap();
        for x in &s.features {
            write!(out, ",{x:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_dataset(text: &str, origin: &str) -> Result<Vec<LabeledSample>> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(origin, 1, "missing header"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 4 || cols[..3] != ["frame_id", "video_id", "label"] {
        return Err(parse_err(
            origin,
            hline,
            "expected header frame_id,video_id,label,f0..f{D-1}",
        ));
    }
    for (d, c) in cols[3..].iter().enumerate() {
        if *c != format!("f{d}") {
            return Err(parse_err(
                origin,
                hline,
                format!("feature column {d} is named {c:?}"),
            ));
        }
    }
    let dim = cols.len() - 3;
    let mut samples = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != dim + 3 {
            return Err(parse_err(
                origin,
                line,
                format!("expected {} columns, found {}", dim + 3, fields.len()),
            ));
        }
        let label = fields[2]
            .trim()
            .parse::<usize>()
            .ok()
            .and_then(|i| ExpressionClass::from_index(i).ok())
            .ok_or_else(|| {
                parse_err(
                    origin,
                    line,
                    format!("field label: {:?} is not a class index 0..7", fields[2]),
                )
            })?;
        let features = fields[3..]
            .iter()
            .enumerate()
            .map(|(d, raw)| parse_real(origin, line, &format!("f{d}"), raw))
            .collect::<Result<Vec<_>>>()?;
        samples.push(LabeledSample {
            frame_id: fields[0].trim().to_string(),
            video_id: fields[1].trim().to_string(),
            features,
            label,
        });
    }
    Ok(samples)
}

pub fn write_dataset(samples: &[LabeledSample], path: &Path) -> Result<()> {
    write_atomic(path, &format_dataset(samples))
}

pub fn read_dataset(path: &Path) -> Result<Vec<LabeledSample>> {
    parse_dataset(&read_text(path)?, &path.display().to_string())
}

/// Folds are written 1-based, matching the `fold{n}_*` artifact names.
pub fn format_fold_plan(plan: &FoldPlan) -> String {
    let mut out = format!("# k={} seed={}\nvideo_id,fold\n", plan.k, plan.seed);
    for (video, fold) in &plan.assignment {
        writeln!(out, "{video},{}", fold + 1).unwrap();
    }
    out
}

pub fn parse_fold_plan(text: &str, origin: &str) -> Result<FoldPlan> {
    let mut all = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, meta) = all
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| parse_err(origin, 1, "empty fold plan"))?;
    let meta_err = || parse_err(origin, 1, "expected `# k=<k> seed=<seed>` header");
    let meta = meta.strip_prefix('#').ok_or_else(meta_err)?;
    let mut k = None;
    let mut seed = None;
    for token in meta.split_whitespace() {
        match token.split_once('=') {
            Some(("k", v)) => k = v.parse::<usize>().ok(),
            Some(("seed", v)) => seed = v.parse::<u64>().ok(),
            _ => return Err(meta_err()),
        }
    }
    let (k, seed) = k.zip(seed).ok_or_else(meta_err)?;

    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, h)) if h.trim() == "video_id,fold" => {}
        Some((line, h)) => {
            return Err(parse_err(
                origin,
                line,
                format!("expected header video_id,fold, got {h:?}"),
            ))
        }
        None => return Err(parse_err(origin, 2, "missing header video_id,fold")),
    }
    let mut assignment = BTreeMap::new();
    for (line, row) in lines {
        let (video, fold) = row
            .split_once(',')
            .ok_or_else(|| parse_err(origin, line, "expected 2 columns"))?;
        let fold = fold
            .trim()
            .parse::<usize>()
            .ok()
            .and_then(|f| f.checked_sub(1))
            .ok_or_else(|| {
                parse_err(
                    origin,
                    line,
                    format!("field fold: {fold:?} is not a fold number >= 1"),
                )
            })?;
        if assignment.insert(video.trim().to_string(), fold).is_some() {
            return Err(parse_err(
                origin,
                line,
                format!("video {video:?} listed twice"),
            ));
        }
    }
    let plan = FoldPlan {
        k,
        seed,
        assignment,
    };
    plan.check()?;
    Ok(plan)
}

pub fn write_fold_plan(plan: &FoldPlan, path: &Path) -> Result<()> {
    write_atomic(path, &format_fold_plan(plan))
}

pub fn read_fold_plan(path: &Path) -> Result<FoldPlan> {
    parse_fold_plan(&read_text(path)?, &path.display().to_string())
}

/// One `frame_id,label_index` line per frame, in matrix order.
pub fn format_submission(m: &PredictionMatrix) -> String {
    let mut out = String::from("frame_id,label_index\n");
    for f in &m.frames {
        writeln!(out, "{},{}", f.frame_id, argmax_scores(&f.probs).index()).unwrap();
    }
    out
}

pub fn write_submission(m: &PredictionMatrix, path: &Path) -> Result<()> {
    let m = validate_prediction_matrix(m.clone())?;
    write_atomic(path, &format_submission(&m))
}

pub fn format_model(model: &LinearSoftmaxModel) -> String {
    let mut out = format!(
        "{MODEL_MAGIC}\nversion={MODEL_FORMAT_VERSION}\ndim={}\nclasses={}\nweights\n",
        model.dim(),
        ExpressionClass::NAMES.join(",")
    );
    let join = |row: &[f64]| {
        row.iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    for row in model.weights().chunks_exact(CLASS_COUNT) {
        out.push_str(&join(row));
        out.push('\n');
    }
    out.push_str("bias\n");
    out.push_str(&join(model.bias()));
    out.push('\n');
    out
}

pub fn parse_model(text: &str, origin: &str) -> Result<LinearSoftmaxModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| {
            parse_err(
                origin,
                0,
                format!("unexpected end of file, expected {what}"),
            )
        })
    };
    let (line, magic) = next("model header")?;
    if magic != MODEL_MAGIC {
        return Err(parse_err(origin, line, "not a linear-softmax model file"));
    }
    let (line, version) = next("version")?;
    if version != format!("version={MODEL_FORMAT_VERSION}") {
        return Err(parse_err(origin, line, format!("unsupported {version:?}")));
    }
    let (line, dim) = next("dim")?;
    let dim = dim
        .strip_prefix("dim=")
        .and_then(|d| d.parse::<usize>().ok())
        .ok_or_else(|| parse_err(origin, line, "expected dim=<D>"))?;
    let (line, classes) = next("classes")?;
    if classes != format!("classes={}", ExpressionClass::NAMES.join(",")) {
        return Err(parse_err(
            origin,
            line,
            "class order differs from the expected taxonomy",
        ));
    }
    let (line, tag) = next("weights")?;
    if tag != "weights" {
        return Err(parse_err(origin, line, "expected `weights`"));
    }
    let mut parse_row = |what: &str| -> Result<Vec<f64>> {
        let (line, row) = next(what)?;
        let values = row
            .split(',')
            .enumerate()
            .map(|(c, raw)| parse_real(origin, line, &format!("{what} column {c}"), raw))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != CLASS_COUNT {
            return Err(parse_err(
                origin,
                line,
                format!("expected {CLASS_COUNT} values"),
            ));
        }
        Ok(values)
    };
    let mut weights = Vec::with_capacity(dim * CLASS_COUNT);
    for _ in 0..dim {
        weights.extend(parse_row("weights")?);
    }
    drop(parse_row);
    let (line, tag) = next("bias")?;
    if tag != "bias" {
        return Err(parse_err(origin, line, "expected `bias`"));
    }
    let bias_row = {
        let (line, row) = next("bias values")?;
        let values = row
            .split(',')
            .enumerate()
            .map(|(c, raw)| parse_real(origin, line, &format!("bias column {c}"), raw))
            .collect::<Result<Vec<_>>>()?;
        <[f64; CLASS_COUNT]>::try_from(values)
            .map_err(|_| parse_err(origin, line, format!("expected {CLASS_COUNT} values")))?
    };
    LinearSoftmaxModel::from_parts(dim, weights, bias_row)
}

pub fn write_model(model: &LinearSoftmaxModel, path: &Path) -> Result<()> {
    write_atomic(path, &format_model(model))
}

pub fn read_model(path: &Path) -> Result<LinearSoftmaxModel> {
    parse_model(&read_text(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix() -> PredictionMatrix {
        let mut a = [0.0; 8];
        a[7] = 1.0;
        let b = [0.1, 0.2, 0.3, 0.05, 0.05, 0.1, 0.1, 0.1];
        PredictionMatrix::new(
            "s",
            vec![
                FramePrediction {
                    frame_id: "v1_00001".into(),
                    video_id: "v1".into(),
                    probs: a,
                },
                FramePrediction {
                    frame_id: "v1_00002".into(),
                    video_id: "v1".into(),
                    probs: b,
                },
                FramePrediction {
                    frame_id: "v2_00001".into(),
                    video_id: "v2".into(),
                    probs: [0.125; 8],
                },
            ],
        )
    }

    #[test]
    fn predictions_round_trip() {
        let m = matrix();
        let back = parse_predictions(&format_predictions(&m), "mem", "s").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn short_row_names_line() {
        let text = format!(
            "{}\nf1,v1,0.125,0.125,0.125,0.125,0.125,0.125,0.25\n",
            prediction_header()
        );
        let err = parse_predictions(&text, "p.csv", "s").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("columns"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_field_names_line_and_field() {
        let text = format!(
            "{}\nf1,v1,0.125,0.125,abc,0.125,0.125,0.125,0.125,0.125\n",
            prediction_header()
        );
        let err = parse_predictions(&text, "p.csv", "s")
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("p.csv:2") && err.contains("fear") && err.contains("abc"),
            "{err}"
        );
    }

    #[test]
    fn permuted_header_is_rejected() {
        let text =
            "frame_id,video_id,disgust,anger,fear,happiness,sadness,surprise,neutral,other\n";
        let err = parse_predictions(text, "p.csv", "s")
            .unwrap_err()
            .to_string();
        assert!(err.contains("order"), "{err}");
    }

    #[test]
    fn submission_lines() {
        let text = format_submission(&matrix());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            vec![
                "frame_id,label_index",
                "v1_00001,7",
                "v1_00002,2",
                "v2_00001,0"
            ]
        );
        assert_eq!(
            format_submission(&PredictionMatrix::new("e", vec![])),
            "frame_id,label_index\n"
        );
    }

    #[test]
    fn dataset_round_trip() {
        let samples = vec![
            LabeledSample {
                frame_id: "a".into(),
                video_id: "v".into(),
                features: vec![0.1, -2.5e-9, 3.0],
                label: ExpressionClass::Other,
            },
            LabeledSample {
                frame_id: "b".into(),
                video_id: "v".into(),
                features: vec![1.0 / 3.0, 0.0, -7.25],
                label: ExpressionClass::Fear,
            },
        ];
        assert_eq!(
            parse_dataset(&format_dataset(&samples), "mem").unwrap(),
            samples
        );
        assert!(parse_dataset("frame_id,video_id,label,f0\na,v,9,1.0\n", "d").is_err());
        assert!(parse_dataset("frame_id,video_id,label,f1\n", "d").is_err());
    }

    #[test]
    fn fold_plan_round_trip() {
        let plan = FoldPlan {
            k: 3,
            seed: 42,
            assignment: [
                ("v1".to_string(), 0),
                ("v2".to_string(), 2),
                ("v3".to_string(), 1),
            ]
            .into_iter()
            .collect(),
        };
        let text = format_fold_plan(&plan);
        assert!(text.starts_with("# k=3 seed=42\nvideo_id,fold\nv1,1\nv2,3\nv3,2\n"));
        assert_eq!(parse_fold_plan(&text, "mem").unwrap(), plan);
        assert!(parse_fold_plan("# k=2 seed=1\nvideo_id,fold\nv1,3\n", "mem").is_err());
        assert!(parse_fold_plan("# k=2 seed=1\nvideo_id,fold\nv1,0\n", "mem").is_err());
        assert!(parse_fold_plan("video_id,fold\nv1,0\n", "mem").is_err());
    }

    #[test]
    fn model_round_trip() {
        let model = LinearSoftmaxModel::from_parts(
            2,
            (0..16).map(|i| (i as f64 - 7.5) / 3.0 * 1e-3).collect(),
            [0.1, -0.2, 1e-300, 0.0, 5.0, -1.0 / 7.0, 2.0, 0.3],
        )
        .unwrap();
        assert_eq!(parse_model(&format_model(&model), "mem").unwrap(), model);
        let broken = format_model(&model).replace("anger,disgust", "disgust,anger");
        assert!(parse_model(&broken, "mem").is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.txt");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
