use std::fs;
use std::path::Path;

use rlid::train::load_checkpoint;

mod common;
use common::{rlid, stderr, stdout};

const SMALL: &[&str] = &[
    "--hidden-dim",
    "16",
    "--ff-dim",
    "32",
    "--layers",
    "1",
    "--max-len",
    "32",
];

/// A 90-record dataset, split, with its vocabulary.
fn small_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = rlid(dir.path(), &["generate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let all = fs::read_to_string(dir.path().join("dataset.tsv")).unwrap();
    let head: String = all.lines().take(90).map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join("dataset.tsv"), head).unwrap();
    for args in [&["split"][..], &["vocab"]] {
        let o = rlid(dir.path(), args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    dir
}

fn train_small(dir: &Path, extra: &[&str]) -> std::process::Output {
    let mut args = vec!["train"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    rlid(dir, &args)
}

#[test]
fn generate_writes_three_thousand_records() {
    let dir = tempfile::tempdir().unwrap();
    let o = rlid(dir.path(), &["generate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("dataset.tsv")).unwrap();
    assert_eq!(text.lines().count(), 3000);
    let out = stdout(&o);
    for label in ["english", "hindi", "russian"] {
        assert!(
            out.lines()
                .any(|l| l.split_whitespace().collect::<Vec<_>>() == [label, "1000"]),
            "{out}"
        );
    }
    assert!(out.contains("dropped: 0"));
}

#[test]
fn generate_is_reproducible_through_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let plain = rlid(p, &["generate", "-o", "a.tsv"]);
    assert!(plain.status.success());
    for out in ["b.tsv", "c.tsv"] {
        let o = rlid(p, &["generate", "--cache-dir", "cache", "-o", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(p.join("a.tsv")).unwrap();
    assert_eq!(a, fs::read(p.join("b.tsv")).unwrap());
    assert_eq!(a, fs::read(p.join("c.tsv")).unwrap());
    assert!(fs::read_dir(p.join("cache")).unwrap().count() > 0);
}

#[test]
fn missing_table_is_a_usage_error_naming_the_label() {
    let dir = tempfile::tempdir().unwrap();
    let o = rlid(dir.path(), &["generate", "--labels", "english,hindi,spanish"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("spanish"), "{}", stderr(&o));
    assert!(!dir.path().join("dataset.tsv").exists());
}

#[test]
fn missing_files_exit_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rlid(dir.path(), &["train", "--train", "no/such/train.tsv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no/such/train.tsv"), "{}", stderr(&o));
    for args in [
        &["split", "--dataset", "nothing.tsv"][..],
        &["inspect"],
        &["eval"],
        &["predict", "--text", "x"],
    ] {
        assert_eq!(rlid(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
    let o = rlid(dir.path(), &["generate", "--corpus", "absent.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.txt"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(rlid(p, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(rlid(p, &["train", "--epochs", "many"]).status.code(), Some(1));
    assert_eq!(rlid(p, &[]).status.code(), Some(1));
    assert_eq!(rlid(p, &["--help"]).status.code(), Some(0));
    fs::write(p.join("d.tsv"), "ok see you\tenglish\n").unwrap();
    assert_eq!(
        rlid(p, &["split", "--dataset", "d.tsv", "--ratio", "1.5"])
            .status
            .code(),
        Some(1)
    );
    fs::write(p.join("bad.toml"), "[train]\nepoch = 3\n").unwrap();
    assert_eq!(rlid(p, &["--config", "bad.toml", "inspect"]).status.code(), Some(1));
    assert_eq!(rlid(p, &["--config", "missing.toml", "inspect"]).status.code(), Some(2));
}

#[test]
fn train_prints_one_line_per_epoch_and_writes_a_checkpoint() {
    let dir = small_workspace();
    let p = dir.path();
    let o = train_small(p, &["--epochs", "1", "--history", "h.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("epoch ")).count(), 1, "{out}");
    assert!(p.join("model.ckpt").is_file());
    let history: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("h.json")).unwrap()).unwrap();
    assert_eq!(history["records"].as_array().unwrap().len(), 1);
}

#[test]
fn config_file_sets_values_and_flags_win() {
    let dir = small_workspace();
    let p = dir.path();
    fs::write(
        p.join("run.toml"),
        "[train]\nepochs = 2\n[model]\nhidden_dim = 16\nff_dim = 32\nn_layers = 1\n",
    )
    .unwrap();
    let from_file = rlid(p, &["--config", "run.toml", "train", "-o", "a.ckpt"]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    assert_eq!(
        stdout(&from_file).lines().filter(|l| l.starts_with("epoch ")).count(),
        2
    );
    let overridden = rlid(p, &["--config", "run.toml", "train", "--epochs", "1", "-o", "b.ckpt"]);
    assert_eq!(
        stdout(&overridden).lines().filter(|l| l.starts_with("epoch ")).count(),
        1
    );
    assert_eq!(load_checkpoint(p.join("a.ckpt")).unwrap().config.hidden_dim, 16);
}

#[test]
fn diverging_training_exits_with_numeric_failure() {
    let dir = small_workspace();
    let o = train_small(dir.path(), &["--epochs", "1", "--lr", "1e30"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"));
}

#[test]
fn invalid_model_shape_is_a_usage_error() {
    let dir = small_workspace();
    let o = train_small(dir.path(), &["--heads", "3"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn eval_predict_and_inspect_on_a_trained_checkpoint() {
    let dir = small_workspace();
    let p = dir.path();
    assert!(train_small(p, &["--epochs", "1"]).status.success());

    let o = rlid(p, &["eval", "--report", "m.json", "--baseline", "train.tsv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let first = out.lines().next().unwrap();
    let value = first.strip_prefix("accuracy: ").unwrap().split(' ').next().unwrap();
    assert_eq!(value.split('.').nth(1).unwrap().len(), 4, "{first}");
    assert!(out.contains("n-gram baseline accuracy: "));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("m.json")).unwrap()).unwrap();
    assert_eq!(report["format"], "rlid-metrics");

    let o = rlid(p, &["predict", "--text", "ap kaise ho", "--text", "kak dela"]);
    assert!(o.status.success());
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    for line in &lines {
        let (label, prob) = line.split_once(' ').unwrap();
        assert!(["english", "hindi", "russian"].contains(&label));
        let prob: f64 = prob.parse().unwrap();
        assert!((1.0 / 3.0..=1.0).contains(&prob));
    }

    let o = rlid(p, &["inspect"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for entry in load_checkpoint(p.join("model.ckpt")).unwrap().manifest() {
        let shape = entry.shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        assert!(
            out.lines()
                .any(|l| l.split_whitespace().take(2).eq([entry.name.as_str(), shape.as_str()])),
            "{} missing from\n{out}",
            entry.name
        );
    }

    fs::write(p.join("broken.ckpt"), b"RLIDCKPT\x01\x00").unwrap();
    assert_eq!(
        rlid(p, &["inspect", "--checkpoint", "broken.ckpt"]).status.code(),
        Some(2)
    );
}

#[test]
fn predict_reads_stdin_lines() {
    use std::io::Write;
    use std::process::{Command, Stdio};
    let dir = small_workspace();
    let p = dir.path();
    assert!(train_small(p, &["--epochs", "1"]).status.success());
    let mut child = Command::new(env!("CARGO_BIN_EXE_rlid"))
        .current_dir(p)
        .arg("predict")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"ap kaise ho\nkak dela\nsee you\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn split_and_vocab_are_deterministic() {
    let dir = small_workspace();
    let p = dir.path();
    let train = fs::read(p.join("train.tsv")).unwrap();
    let vocab = fs::read(p.join("vocab.json")).unwrap();
    assert!(rlid(p, &["split"]).status.success());
    assert!(rlid(p, &["vocab"]).status.success());
    assert_eq!(fs::read(p.join("train.tsv")).unwrap(), train);
    assert_eq!(fs::read(p.join("vocab.json")).unwrap(), vocab);
    assert!(rlid(
        p,
        &[
            "--seed",
            "7",
            "split",
            "--train-out",
            "t7.tsv",
            "--validation-out",
            "v7.tsv"
        ]
    )
    .status
    .success());
    assert_ne!(fs::read(p.join("t7.tsv")).unwrap(), train);
}
