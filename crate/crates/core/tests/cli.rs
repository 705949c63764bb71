use std::path::Path;
use std::process::{Command, Output};

fn mococlip(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mococlip"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .env_remove("MOCOCLIP_RUNS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = mococlip(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL_RUN: &str = r#"
[data]
manifest = "toy/manifest.csv"

[train]
batch_size = 8
epochs = 1
queue_capacity = 32

[train.model]
image_size = 16
patch_size = 8
patch_proj = 8
image_hidden = 16
embed_dim = 16
token_dim = 8
text_hidden = 16
max_len = 48
"#;

/// Toy data plus a small-model run config in a fresh directory.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth-data", "--n", "80", "--pathologies", "3", "--seed", "2", "--out-dir", "toy"]);
    std::fs::write(dir.path().join("run.toml"), SMALL_RUN).unwrap();
    dir
}

#[test]
fn help_lists_flags_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let top = ok(dir.path(), &["--help"]);
    for cmd in ["synth-data", "train", "zeroshot", "eval", "ablate", "report", "convert-chexpert", "probe", "templates"] {
        assert!(top.contains(cmd), "{cmd} missing from top-level help");
        ok(dir.path(), &[cmd, "--help"]);
    }
    let train = ok(dir.path(), &["train", "--help"]);
    for needle in [
        "--loss-config",
        "[default: A]",
        "--lr",
        "[default: 0.0001]",
        "--weight-decay",
        "--momentum",
        "[default: 0.999]",
        "--batch-size",
        "[default: 32]",
        "--queue-capacity",
        "--seed",
        "--lambda",
        "[default: 1]",
        "MOCOCLIP_RUNS",
    ] {
        assert!(train.contains(needle), "`{needle}` missing from train --help");
    }
    let synth = ok(dir.path(), &["synth-data", "--help"]);
    for needle in ["--n", "--pathologies", "--size", "--prevalence", "--seed", "--out-dir"] {
        assert!(synth.contains(needle));
    }
}

#[test]
fn synth_data_is_deterministic_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(d, &["synth-data", "--n", "30", "--pathologies", "2", "--seed", "5", "--out-dir", "a"]);
    assert!(out.contains("a/manifest.csv") && out.contains("Atelectasis") && out.contains("No Finding"));
    ok(d, &["synth-data", "--n", "30", "--pathologies", "2", "--seed", "5", "--out-dir", "b"]);
    assert_eq!(std::fs::read(d.join("a/manifest.csv")).unwrap(), std::fs::read(d.join("b/manifest.csv")).unwrap());

    let bad = mococlip(d, &["synth-data", "--n", "5", "--out-dir", "c"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("below minimum"));
    assert_eq!(mococlip(d, &["synth-data", "--n", "ten"]).status.code(), Some(2));
}

#[test]
fn bad_loss_config_lists_valid_options() {
    let dir = tempfile::tempdir().unwrap();
    let out = mococlip(dir.path(), &["train", "--loss-config", "Q"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for opt in ["A", "B", "C", "D"] {
        assert!(err.contains(opt), "{err}");
    }
}

#[test]
fn config_errors_exit_2() {
    let ws = workspace();
    let d = ws.path();
    std::fs::write(d.join("typo.toml"), "[train]\nbatch_sise = 8\n").unwrap();
    let out = mococlip(d, &["train", "--config", "typo.toml"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("batch_sise"));

    let out = mococlip(d, &["train", "--config", "run.toml", "--batch-size", "1"]);
    assert_eq!(out.status.code(), Some(2));
    // No manifest anywhere.
    assert_eq!(mococlip(d, &["train"]).status.code(), Some(2));
}

#[test]
fn zero_epochs_leave_an_initialized_run() {
    let ws = workspace();
    let d = ws.path();
    ok(d, &["train", "--config", "run.toml", "--epochs", "0", "--run-id", "init"]);
    let run = d.join("runs/init");
    for f in ["ckpt-final", "ckpt-best", "config.toml", "eval-test.json"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let cfg = mococlip::config::RunConfigFile::load(&run.join("config.toml")).unwrap();
    assert_eq!(cfg.train.epochs, 0);
    let state = mococlip::trainer::load_checkpoint(&run.join("ckpt-final")).unwrap();
    assert_eq!(state.step, 0);
}

#[test]
fn runs_root_from_environment() {
    let ws = workspace();
    let d = ws.path();
    let out = Command::new(env!("CARGO_BIN_EXE_mococlip"))
        .args(["train", "--config", "run.toml", "--epochs", "0"])
        .current_dir(d)
        .env("MOCOCLIP_RUNS", "elsewhere")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(d.join("elsewhere/A-bs8-seed0/ckpt-final").exists());
}

#[test]
fn train_zeroshot_eval_report_pipeline() {
    let ws = workspace();
    let d = ws.path();
    ok(d, &["train", "--config", "run.toml", "--run-id", "one"]);
    ok(d, &["train", "--config", "run.toml", "--run-id", "two", "--seed", "3"]);
    let metrics = std::fs::read_to_string(d.join("runs/one/metrics.log")).unwrap();
    assert!(metrics.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));

    let zs = [
        "zeroshot", "--checkpoint", "runs/one/ckpt-best", "--manifest", "toy/manifest.csv", "--out", "p1.csv",
    ];
    ok(d, &zs);
    let mut again = zs;
    again[6] = "p2.csv";
    ok(d, &again);
    let p1 = std::fs::read(d.join("p1.csv")).unwrap();
    assert_eq!(p1, std::fs::read(d.join("p2.csv")).unwrap());
    let state = mococlip::trainer::load_checkpoint(&d.join("runs/one/ckpt-best")).unwrap();
    let lines = String::from_utf8(p1).unwrap().lines().count();
    assert_eq!(lines, 1 + 80 * state.classes.len());

    let eval = ok(d, &["eval", "--predictions", "p1.csv", "--manifest", "toy/manifest.csv", "--out", "e.json"]);
    assert!(eval.contains("Macro"));
    assert!(mococlip::eval::EvalReport::load(&d.join("e.json")).is_ok());

    let report = ok(d, &["report", "runs/one", "runs/two"]);
    assert!(report.contains("one") && report.contains("two") && report.contains("Average AUC"));
    let refs = ok(d, &["report", "--reference", "nih-zero-shot"]);
    assert!(refs.contains("MoCoCLIP") && refs.contains("0.742"));
    assert_eq!(mococlip(d, &["report"]).status.code(), Some(2));
}

#[test]
fn zeroshot_missing_template_names_the_pathology() {
    let ws = workspace();
    let d = ws.path();
    ok(d, &["train", "--config", "run.toml", "--epochs", "0", "--run-id", "z"]);
    std::fs::write(
        d.join("partial.toml"),
        "[\"Atelectasis\"]\nreport_sentence = \"x\"\nprompt_pos = \"y\"\nprompt_neg = \"z\"\n",
    )
    .unwrap();
    let out = mococlip(
        d,
        &[
            "zeroshot", "--checkpoint", "runs/z/ckpt-final", "--manifest", "toy/manifest.csv", "--templates",
            "partial.toml", "--pathologies", "Atelectasis,Consolidation",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Consolidation"), "{}", stderr(&out));
}

#[test]
fn eval_with_missing_ids_exits_1() {
    let ws = workspace();
    let d = ws.path();
    ok(d, &["train", "--config", "run.toml", "--epochs", "0", "--run-id", "z"]);
    ok(d, &["zeroshot", "--checkpoint", "runs/z/ckpt-final", "--manifest", "toy/manifest.csv", "--out", "p.csv"]);
    let manifest = std::fs::read_to_string(d.join("toy/manifest.csv")).unwrap();
    let header = manifest.lines().next().unwrap();
    let rows: Vec<&str> = manifest.lines().skip(1).collect();
    let mut truncated = String::from(header);
    truncated.push('\n');
    for r in &rows[..70] {
        truncated.push_str(r);
        truncated.push('\n');
    }
    std::fs::write(d.join("toy/short.csv"), truncated).unwrap();
    let out = mococlip(d, &["eval", "--predictions", "p.csv", "--manifest", "toy/short.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("00000080_000.png"), "{}", stderr(&out));
}

#[test]
fn convert_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("chex.csv"),
        "Path,Sex,No Finding,Pleural Effusion,Edema,Fracture\n\
         train/patient00001/study1/view1.jpg,F,,1.0,0.0,1.0\n\
         train/patient00002/study1/view1.jpg,M,1.0,,,\n",
    )
    .unwrap();
    let out = ok(d, &["convert-chexpert", "--input", "chex.csv", "--out", "m.csv"]);
    assert!(out.contains("2 rows") && out.contains("Fracture"), "{out}");
    let m = std::fs::read_to_string(d.join("m.csv")).unwrap();
    assert!(m.contains("Effusion") && m.contains("patient00001"));

    ok(d, &["synth-data", "--n", "300", "--pathologies", "2", "--seed", "1", "--out-dir", "toy"]);
    let probe = ok(d, &["probe", "--manifest", "toy/manifest.csv"]);
    assert!(probe.contains("pass"));
}

#[test]
fn templates_roundtrip_as_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["templates", "--out", "t.toml"]);
    let table = mococlip::reports::TemplateTable::load(&d.join("t.toml")).unwrap();
    assert_eq!(table, mococlip::reports::TemplateTable::default_table());
}
