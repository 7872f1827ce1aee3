use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use textguard::cli::SEED_ENV;

fn textguard(args: &[&str], dir: &Path, seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_textguard"));
    cmd.args(args).current_dir(dir).env_remove(SEED_ENV);
    if let Some(s) = seed_env {
        cmd.env(SEED_ENV, s);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = textguard(args, dir, None);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty(), "stderr on success: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn synth(dir: &Path, n: usize) {
    ok(&["synth", "--seed", "3", "--n", &n.to_string(), "--out", "corpus.csv"], dir);
}

#[test]
fn synth_train_evaluate_predict_round_trip() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, 80);
    let trained = ok(
        &["train", "--corpus", "corpus.csv", "--route", "tfidf", "--model", "logistic", "--out", "run"],
        d,
    );
    assert!(trained.contains("roc auc"));
    for f in ["config.json", "metrics.txt", "metrics.kv", "curves.csv", "model.ckpt"] {
        assert!(d.join("run").join(f).is_file(), "missing {f}");
    }

    // Re-scoring the checkpoint reproduces the metrics written at training time.
    let evaluated = ok(&["evaluate", "--run", "run"], d);
    assert_eq!(evaluated, read(d.join("run/metrics.txt")));

    let predicted = ok(&["predict", "--run", "run", "--text", "انت غبي", "--text", "شكرا لك"], d);
    let lines: Vec<&str> = predicted.lines().collect();
    assert_eq!(lines[0], "label\tprobability\ttext");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split('\t').collect();
        let p: f64 = cols[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(cols[0], if p >= 0.5 { "1" } else { "0" });
    }
}

#[test]
fn incompatible_route_and_model_exit_two_naming_the_rule() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, 40);
    let out = textguard(
        &["train", "--corpus", "corpus.csv", "--route", "tfidf", "--model", "bilstm", "--out", "run"],
        d,
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tfidf requires logistic"), "{err}");
    assert!(!d.join("run").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, 40);
    std::fs::write(d.join("cfg.json"), r#"{"feature_route": "tfidf", "learning_rate": 0.1}"#).unwrap();
    let out = textguard(&["train", "--config", "cfg.json", "--corpus", "corpus.csv", "--out", "run"], d, None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let out = textguard(&["train", "--no-such-flag"], tmp.path(), None);
    assert_eq!(out.status.code(), Some(1));
    let out = textguard(&[], tmp.path(), None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_flag_beats_environment_beats_default() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let run = |name: &str, flag: Option<&str>, env: Option<&str>| {
        let mut args = vec!["synth", "--n", "30", "--out", name];
        if let Some(s) = flag {
            args.extend(["--seed", s]);
        }
        let out = textguard(&args, d, env);
        assert_eq!(out.status.code(), Some(0));
        read(d.join(name))
    };
    let default = run("a.csv", None, None);
    let explicit_42 = run("b.csv", Some("42"), None);
    let env_9 = run("c.csv", None, Some("9"));
    let flag_9 = run("d.csv", Some("9"), None);
    let flag_over_env = run("e.csv", Some("9"), Some("5"));
    assert_eq!(default, explicit_42);
    assert_eq!(env_9, flag_9);
    assert_eq!(flag_over_env, flag_9);
    assert_ne!(default, flag_9);

    let out = textguard(&["synth", "--n", "30", "--out", "f.csv"], d, Some("not-a-number"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn environment_seed_is_recorded_in_the_run_config() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, 40);
    let out = textguard(
        &["train", "--corpus", "corpus.csv", "--route", "tfidf", "--model", "logistic", "--out", "run"],
        d,
        Some("17"),
    );
    assert_eq!(out.status.code(), Some(0));
    let cfg: serde_json::Value = serde_json::from_str(&read(d.join("run/config.json"))).unwrap();
    assert_eq!(cfg["seed"], 17);
    assert_eq!(cfg["train"]["seed"], 17);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, 60);
    std::fs::write(
        d.join("cfg.json"),
        r#"{"feature_route": "subword", "model_kind": "lstm", "embed_dim": 8, "hidden_dim": 4,
            "dense_dim": 4, "train": {"epochs": 3}}"#,
    )
    .unwrap();
    ok(&["train", "--config", "cfg.json", "--corpus", "corpus.csv", "--out", "first"], d);
    ok(&["train", "--config", "first/config.json", "--out", "second"], d);
    assert_eq!(read(d.join("first/config.json")).replace("first", "second"), read(d.join("second/config.json")));
    assert_eq!(read(d.join("first/metrics.kv")), read(d.join("second/metrics.kv")));
    assert_eq!(
        read(d.join("first/model.ckpt")).replace("\"first\"", "\"second\""),
        read(d.join("second/model.ckpt"))
    );
}

#[test]
fn featurize_writes_one_line_per_post() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, 25);
    let out = ok(&["featurize", "--corpus", "corpus.csv", "--route", "tfidf", "--model", "logistic", "--out", "f"], d);
    assert!(out.contains("25 posts"));
    let features = read(d.join("f/features.txt"));
    assert_eq!(features.lines().count(), 25);
    assert!(features.lines().all(|l| l.starts_with('0') || l.starts_with('1')));
    assert!(d.join("f/vocab.tsv").is_file());
}

#[test]
fn kappa_and_table_check_print_summaries() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("ann.csv"), "a,b\n1,1\n0,0\n1,0\n0,0\n").unwrap();
    let k = ok(&["kappa", "ann.csv"], d);
    assert!(k.contains("items=4"));
    assert!(k.contains("kappa=0.500"), "{k}");
    let t = ok(&["check-table4"], d);
    assert_eq!(t.matches("INCONSISTENT").count(), 5);
}
