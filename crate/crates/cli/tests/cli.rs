use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "--profile",
    "desk",
    "--epochs",
    "2",
    "--trajectories-per-epoch",
    "2",
    "--horizon",
    "30",
    "--hidden",
    "8",
    "--minibatches",
    "4",
    "--episodes",
    "3",
];

fn instinct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_instinct"))
        .args(args)
        .env_remove("INSTINCT_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = instinct(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tiny(cmd: &str, out: &Path, extra: &[&str]) -> Vec<String> {
    let mut args = vec![cmd.to_string(), "--out".into(), out.display().to_string()];
    args.extend(TINY.iter().map(|s| s.to_string()));
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn as_strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn help_and_version_exit_zero() {
    assert!(instinct(&["--help"]).status.success());
    assert!(instinct(&["--version"]).status.success());
    assert!(instinct(&["train", "--help"]).status.success());
}

#[test]
fn bad_flag_is_usage_error() {
    assert_eq!(
        instinct(&["train", "--no-such-flag"]).status.code(),
        Some(1)
    );
    assert_eq!(instinct(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn out_of_range_value_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = instinct(&[
        "pretrain-policy",
        "--gamma",
        "1.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("gamma"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"profile": "desk", "learning_rate": 0.1}"#).unwrap();
    let out = instinct(&["pretrain-policy", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("learning_rate"), "{}", stderr(&out));
}

#[test]
fn empty_suite_lists_missing_fields() {
    let out = instinct(&["suite", "--profile", "desk"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    for key in ["tasks", "modes", "seeds"] {
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn ir2l_without_instinct_is_usage_error() {
    let out = instinct(&["train", "--task", "buttons", "--mode", "ir2l"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("instinct"), "{}", stderr(&out));
}

#[test]
fn missing_checkpoint_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = instinct(&[
        "evaluate",
        "--task",
        "goal",
        "--checkpoint",
        dir.path().join("absent.json").to_str().unwrap(),
        "--out",
        dir.path().join("eval").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn diverging_update_is_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let args = tiny(
        "pretrain-policy",
        dir.path(),
        &["--lr", "1e200", "--max-grad-norm", "1e300"],
    );
    let out = instinct(&as_strs(&args));
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn train_defaults_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let args = tiny(
        "train",
        dir.path(),
        &[
            "--task",
            "buttons",
            "--mode",
            "random_baseline",
            "--seed",
            "7",
        ],
    );
    run_ok(&as_strs(&args));
    let cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["hazard_punishment"], 1.0);
    assert_eq!(cfg["gamma"], 0.99);
    assert_eq!(cfg["seed"], 7);
    assert_eq!(cfg["command"], "train");
    for file in ["metrics.csv", "checkpoint.json", "eval.json"] {
        assert!(dir.path().join(file).is_file(), "{file}");
    }
}

#[test]
fn echoed_config_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    run_ok(&as_strs(&tiny("pretrain-policy", &first, &["--seed", "3"])));
    let config = first.join("config.json");
    run_ok(&[
        "pretrain-policy",
        "--config",
        config.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    let a = fs::read(first.join("metrics.csv")).unwrap();
    let b = fs::read(second.join("metrics.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);
}

#[test]
fn full_pipeline_then_suite_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let s = |name: &str| p(name).display().to_string();

    run_ok(&as_strs(&tiny("pretrain-policy", &p("p1"), &[])));
    let policy = s("p1/checkpoint.json");
    run_ok(&as_strs(&tiny(
        "pretrain-instinct",
        &p("p2"),
        &["--policy", &policy],
    )));
    run_ok(&as_strs(&tiny(
        "pretrain-baseline",
        &p("pb"),
        &["--policy", &policy],
    )));
    let instinct_ckpt = s("p2/checkpoint.json");
    let pretrained = s("pb/checkpoint.json");

    run_ok(&as_strs(&tiny(
        "train",
        &p("t"),
        &[
            "--task",
            "push",
            "--mode",
            "ir2l",
            "--instinct",
            &instinct_ckpt,
        ],
    )));
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p("t/eval.json")).unwrap()).unwrap();
    assert_eq!(eval["returns"].as_array().unwrap().len(), 3);

    run_ok(&as_strs(&tiny(
        "evaluate",
        &p("e"),
        &["--task", "goal", "--checkpoint", &instinct_ckpt],
    )));
    assert!(p("e/eval.json").is_file());

    run_ok(&as_strs(&tiny(
        "export-trajectory",
        &p("x"),
        &["--task", "goal", "--checkpoint", &instinct_ckpt],
    )));
    let lines = fs::read_to_string(p("x/trajectory.jsonl"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(lines, 31);

    let out = run_ok(&as_strs(&tiny(
        "suite",
        &p("s"),
        &[
            "--tasks",
            "buttons",
            "--modes",
            "ir2l,random_baseline,pretrained_baseline",
            "--seeds",
            "0,1",
            "--instinct",
            &instinct_ckpt,
            "--pretrained",
            &pretrained,
        ],
    )));
    let printed = String::from_utf8(out.stdout).unwrap();
    assert!(
        printed.contains("ir2l") && printed.contains("random_baseline"),
        "{printed}"
    );
    assert!(p("s/summary.csv").is_file());
    assert!(p("s/buttons-ir2l-seed1/metrics.csv").is_file());

    let out = run_ok(&["summarize", &s("s"), "--out", &s("sum")]);
    assert!(!out.stdout.is_empty());
    assert_eq!(
        fs::read_to_string(p("sum/summary.csv")).unwrap(),
        fs::read_to_string(p("s/summary.csv")).unwrap()
    );
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["paper.json", "desk.json"] {
        let dir = tempfile::tempdir().unwrap();
        let out = instinct(&[
            "suite",
            "--config",
            root.join(name).to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        // The configs parse and resolve; only the checkpoints are missing.
        assert_eq!(out.status.code(), Some(1), "{name}: {}", stderr(&out));
        let err = stderr(&out);
        assert!(
            err.contains("instinct_checkpoint") && !err.contains("seeds"),
            "{name}: {err}"
        );
    }
}
