use expr_ensemble::io::{read_fold_plan, read_predictions};
use expr_ensemble::synthetic::{write_synthetic, DEFAULT_PRIORS};
use expr_ensemble::{generate_synthetic, run_pipeline, RunConfig, SourceMode, SyntheticSpec};

#[test]
fn artifacts_are_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let outcome = run_pipeline(&RunConfig::synthetic(&out, 42, SourceMode::Files)).unwrap();
    let a = &outcome.artifacts;
    assert_eq!(a.fold_weights.len(), 5);
    assert_eq!(a.fold_reports.len(), 5);
    for path in a.fold_weights.iter().chain(&a.fold_reports).chain([
        &a.fold_plan,
        &a.final_report,
        &a.fused_predictions,
        &a.submission,
    ]) {
        assert!(
            path.starts_with(&out) && path.is_file(),
            "{}",
            path.display()
        );
    }
    assert_eq!(read_fold_plan(&a.fold_plan).unwrap().k, 5);
    assert_eq!(
        read_predictions(&a.fused_predictions).unwrap().frames,
        outcome.fused.frames
    );
    let report = std::fs::read_to_string(&a.final_report).unwrap();
    assert!(report.contains("source,macro_f1"), "{report}");
    assert_eq!(outcome.source_reports.len(), 3);
    assert_eq!(outcome.folds.len(), 5);
}

#[test]
fn preset_weights_from_toml_config() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate_synthetic(&SyntheticSpec {
        videos: 10,
        seed: 5,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let (dataset, sources) = write_synthetic(&data, &tmp.path().join("data")).unwrap();
    let toml = format!(
        "dataset = {:?}\npredictions = {:?}\noutput_dir = {:?}\nsource_mode = \"files\"\npreset = \"Fusion 3\"\n",
        dataset,
        sources,
        tmp.path().join("out")
    );
    let outcome = run_pipeline(&RunConfig::from_toml(&toml).unwrap()).unwrap();
    assert_eq!(outcome.folds[1].weights.as_slice(), [0.6, 0.0, 0.7]);
    assert_eq!(outcome.folds[4].weights.as_slice(), [0.5, 0.0, 1.1]);
    assert_eq!(outcome.fused.len(), data.samples.len());
}

#[test]
fn synthetic_class_frequencies_track_priors() {
    let data = generate_synthetic(&SyntheticSpec {
        videos: 120,
        seed: 11,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let n = data.samples.len();
    assert!(n >= 10_000, "{n} frames");
    let mut counts = [0usize; 8];
    for s in &data.samples {
        counts[s.label.index()] += 1;
    }
    for (c, (&count, &prior)) in counts.iter().zip(&DEFAULT_PRIORS).enumerate() {
        let freq = count as f64 / n as f64;
        assert!((freq - prior).abs() <= 0.03, "class {c}: {freq} vs {prior}");
    }
}

#[test]
fn stage_errors_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let config = RunConfig {
        dataset: Some(tmp.path().join("missing.csv")),
        output_dir: tmp.path().join("out"),
        ..RunConfig::default()
    };
    let err = run_pipeline(&config).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("load"), "{err}");
}
