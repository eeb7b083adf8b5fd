use std::path::Path;
use std::process::{Command, Output};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expr-ensemble"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn expr-ensemble")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cli(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SOURCES: [&str; 3] = [
    "data/source_0.csv",
    "data/source_1.csv",
    "data/source_2.csv",
];

#[test]
fn staged_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        dir,
        &["gen", "--out", "data", "--videos", "12", "--seed", "7"],
    );
    ok(
        dir,
        &[
            "split",
            "--dataset",
            "data/dataset.csv",
            "--out",
            "plan.csv",
        ],
    );

    let mut fold_outputs = Vec::new();
    for fold in 1..=5 {
        let fold_arg = fold.to_string();
        let sel = ["--plan", "plan.csv", "--fold", fold_arg.as_str()];
        let model = format!("m{fold}.txt");
        let preds = format!("p{fold}.csv");
        ok(
            dir,
            &[
                &[
                    "train",
                    "--dataset",
                    "data/dataset.csv",
                    "--out",
                    &model,
                    "--epochs",
                    "3",
                ][..],
                &sel,
            ]
            .concat(),
        );
        ok(
            dir,
            &[
                "predict",
                "--model",
                &model,
                "--dataset",
                "data/dataset.csv",
                "--out",
                &preds,
            ],
        );
        let out = ok(
            dir,
            &[
                &[
                    "search",
                    "--dataset",
                    "data/dataset.csv",
                    "--grid",
                    "0:1:0.5",
                    "--inputs",
                ][..],
                &SOURCES,
                &sel,
            ]
            .concat(),
        );
        assert!(out.contains("weights = "), "{out}");
        let fused = format!("fused{fold}.csv");
        ok(
            dir,
            &[
                &[
                    "fuse",
                    "--preset",
                    "Fusion 2",
                    "--preset-fold",
                    &fold_arg,
                    "--out",
                    &fused,
                    "--inputs",
                ][..],
                &SOURCES,
            ]
            .concat(),
        );
        fold_outputs.push(fused);
    }
    let mut across = vec![
        "fuse",
        "--across",
        "--out",
        "final.csv",
        "--submission",
        "sub.csv",
        "--inputs",
    ];
    across.extend(fold_outputs.iter().map(String::as_str));
    ok(dir, &across);

    let report = ok(
        dir,
        &[
            "eval",
            "--predictions",
            "final.csv",
            "--dataset",
            "data/dataset.csv",
            "--report",
            "report.txt",
        ],
    );
    assert!(report.starts_with("macro_f1 = "));
    let frames = std::fs::read_to_string(dir.join("data/dataset.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    let sub = std::fs::read_to_string(dir.join("sub.csv")).unwrap();
    assert_eq!(sub.lines().next(), Some("frame_id,label_index"));
    assert_eq!(sub.lines().count() - 1, frames);
}

#[test]
fn pipeline_command_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for out in ["a", "b"] {
        ok(
            dir,
            &[
                "pipeline",
                "--synthetic",
                "--mode",
                "files",
                "--seed",
                "3",
                "--out",
                out,
            ],
        );
    }
    for name in [
        "submission.csv",
        "final_report.txt",
        "fold_plan.csv",
        "fold3_weights.txt",
    ] {
        assert_eq!(
            std::fs::read(dir.join("a").join(name)).unwrap(),
            std::fs::read(dir.join("b").join(name)).unwrap(),
            "{name}"
        );
    }
    let config = ok(dir, &["pipeline", "--synthetic", "--print-config"]);
    assert!(config.contains("source_mode = \"train\""), "{config}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(cli(dir, &["--help"]).status.code(), Some(0));
    assert_eq!(cli(dir, &["frobnicate"]).status.code(), Some(1));
    let missing = cli(
        dir,
        &["eval", "--predictions", "nope.csv", "--dataset", "nope.csv"],
    );
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.csv"));

    ok(dir, &["gen", "--out", "data", "--videos", "5"]);
    let bad_weights = cli(
        dir,
        &[
            &["fuse", "--weights", "1:-2:1", "--out", "x.csv", "--inputs"][..],
            &SOURCES,
        ]
        .concat(),
    );
    assert_eq!(bad_weights.status.code(), Some(1));
    let wrong_count = cli(
        dir,
        &[
            &["fuse", "--weights", "1:1", "--out", "x.csv", "--inputs"][..],
            &SOURCES,
        ]
        .concat(),
    );
    assert_eq!(wrong_count.status.code(), Some(1));
    assert!(!dir.join("x.csv").exists());

    std::fs::write(dir.join("bad.csv"), "frame_id,video_id,anger\nf,v,1\n").unwrap();
    let parse = cli(dir, &["fuse", "--out", "y.csv", "--inputs", "bad.csv"]);
    assert_eq!(parse.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("bad.csv:1"));
}
