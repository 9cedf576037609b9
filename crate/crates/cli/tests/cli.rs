use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tables.jsonl")
}

fn causal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = causal(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(
        out.stderr.is_empty(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_dataset_writes_summary_and_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first.jsonl");
    let second = dir.path().join("second.jsonl");
    let text = ok(&["--out", s(&first), "build-dataset", s(&fixture())]);
    assert!(
        text.contains("Total                3       6          2"),
        "{text}"
    );
    let built = fs::read_to_string(&first).unwrap();
    assert_eq!(built.lines().count(), 3);
    assert!(built.contains("\"canonical_frame\":0"));
    ok(&["--out", s(&second), "build-dataset", s(&first)]);
    assert_eq!(built, fs::read_to_string(&second).unwrap());
}

#[test]
fn malformed_line_exits_with_line_number() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("raw.jsonl");
    let good = fs::read_to_string(fixture()).unwrap();
    let first = good.lines().next().unwrap();
    fs::write(&raw, format!("{first}\n{{\"video_id\": 3}}\n")).unwrap();
    let out = causal(&[
        "--out",
        s(&dir.path().join("o.jsonl")),
        "build-dataset",
        s(&raw),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn help_lists_every_config_key() {
    let text = ok(&["--help"]);
    for key in [
        "seed",
        "dataset",
        "checkpoint",
        "out",
        "split",
        "eval_split",
        "encoder",
        "encoder_dim",
        "encoder_seed",
        "pool_policy",
        "temporal_filter",
        "include_activities",
        "threshold",
        "deconjugate",
        "[training]",
        "learning_rate",
        "epochs",
        "early_stopping",
        "patience",
        "top_m_objects",
        "hidden_dim",
        "classifier_input",
        "ablation_mode",
    ] {
        assert!(text.contains(key), "--help is missing {key}");
    }
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[training]\nlearnin_rate = 0.1\n").unwrap();
    let out = causal(&[
        "--config",
        s(&cfg),
        "--dataset",
        s(&fixture()),
        "predict",
        "--oracle",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learnin_rate"));
}

fn planted(dir: &Path) -> PathBuf {
    let data = dir.join("planted.jsonl");
    ok(&["--seed", "4", "--out", s(&data), "synth", "--videos", "40"]);
    data
}

#[test]
fn train_then_eval_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let data = planted(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "split = [0.6, 0.2, 0.2]\n[training]\nlearning_rate = 0.01\nepochs = 3\nhidden_dim = 16\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let ckpt = out.join("checkpoint.json");
        let common = ["--config", s(&cfg), "--seed", "9", "--dataset", s(&data)];
        ok(&[&common[..], &["--out", s(&out), "train"]].concat());
        let text = ok(&[
            &common[..],
            &["--checkpoint", s(&ckpt), "--out", s(&out), "eval"],
        ]
        .concat());
        assert!(text.contains("fusion/full"));
        outputs.push(
            [
                "checkpoint.json",
                "history.json",
                "report.json",
                "report.txt",
            ]
            .map(|f| fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn ablate_reports_three_modes() {
    let dir = TempDir::new().unwrap();
    let data = planted(dir.path());
    let out = dir.path().join("abl");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "split = [0.6, 0.2, 0.2]\n[training]\nepochs = 2\nhidden_dim = 8\n",
    )
    .unwrap();
    let text = ok(&[
        "--config",
        s(&cfg),
        "--dataset",
        s(&data),
        "--out",
        s(&out),
        "ablate",
    ]);
    for mode in ["full", "no_visual", "no_lingual"] {
        assert!(text.contains(mode));
        assert!(out.join(format!("report_{mode}.json")).exists());
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["delta_vs_full", "full", "no_lingual", "no_visual"]);
    assert_eq!(json["delta_vs_full"].as_array().unwrap().len(), 3);
}

#[test]
fn oracle_predictions_label_and_explain_pairs() {
    let dir = TempDir::new().unwrap();
    let text = ok(&[
        "--dataset",
        s(&fixture()),
        "--out",
        s(dir.path()),
        "predict",
        "--oracle",
    ]);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[1].starts_with("tire-shine e1 -> e2"));
    assert!(lines[1].ends_with("Yes  The rims are shiny because tire shine was applied."));
    assert!(lines[2].ends_with("No  No causal rationalization since events are not causal."));
    let rows = fs::read_to_string(dir.path().join("predictions.jsonl")).unwrap();
    assert_eq!(rows.lines().count(), 3);
}

#[test]
fn rationalize_builds_question_choices_and_output() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "deconjugate = true\n").unwrap();
    let text = ok(&[
        "--config",
        s(&cfg),
        "--dataset",
        s(&fixture()),
        "rationalize",
        "--oracle",
        "--pair",
        "frisbee/e1/e2",
    ]);
    assert!(text.contains("Question: Why does the dog jump to catch the frisbee?\n"));
    assert!(
        text.contains("Choices: girl throws frisbee, dog sits on grass, girl stands on grass\n")
    );
    assert!(text.contains("Output: The dog jumps because the girl throws the frisbee.\n"));
}

#[test]
fn eval_without_checkpoint_fails_cleanly() {
    let dir = TempDir::new().unwrap();
    let out = causal(&["--dataset", s(&fixture()), "--out", s(dir.path()), "eval"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));
}
