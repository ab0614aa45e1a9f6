use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[corpus]
n_papers = 300
[queries]
n_train = 8
n_eval = 4
[imitation]
demo_queries = 4
epochs = 5
[ppo]
learning_rate = 0.01
value_learning_rate = 0.001
total_steps = 4
policy_freeze_steps = 2
checkpoint_every = 2
[ablate]
alphas = [0.5, 2.0]
costs = [0.1]
"#;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pasa-lab"))
        .args(args)
        .env("PASA_LAB_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = lab(args);
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

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    (dir, cfg)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn prepare(cfg: &Path) {
    ok(&["gen-corpus", "--config", s(cfg)]);
    ok(&["gen-queries", "--config", s(cfg)]);
    ok(&["bc-train", "--config", s(cfg)]);
}

#[test]
fn gen_corpus_writes_header_then_papers() {
    let (dir, cfg) = setup();
    let out = dir.path().join("corpus.jsonl");
    ok(&[
        "gen-corpus",
        "--config",
        s(&cfg),
        "--seed",
        "42",
        "--out",
        s(&out),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["seed"], 42);
    assert_eq!(lines.count(), 300);
}

#[test]
fn full_pipeline_writes_outputs() {
    let (dir, cfg) = setup();
    prepare(&cfg);
    let out_dir = dir.path().join("out");
    ok(&["ppo-train", "--config", s(&cfg)]);
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,phase,mean_return,mean_kl,mean_actions,policy_loss,value_loss\n"));
    assert_eq!(metrics.lines().count(), 5);
    assert!(out_dir.join("checkpoint_step2.json").exists());
    assert!(out_dir.join("checkpoint_step4.json").exists());

    let eval = ok(&["eval", "--config", s(&cfg)]);
    assert!(String::from_utf8_lossy(&eval.stdout).contains("crawler_recall"));
    assert_eq!(
        fs::read_to_string(out_dir.join("eval.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
    let rollouts = fs::read_to_string(out_dir.join("rollouts.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(rollouts.lines().next().unwrap()).unwrap();
    assert!(first["reward"].is_number() && first["action"].is_string());

    ok(&["ensemble", "--config", s(&cfg), "--runs", "2"]);
    assert!(out_dir.join("ensemble.csv").exists());

    ok(&[
        "ablate",
        "--config",
        s(&cfg),
        "--variants",
        "no-expand,alpha-sweep",
    ]);
    let table = fs::read_to_string(out_dir.join("ablation.csv")).unwrap();
    let variants: Vec<&str> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(variants, ["full", "no-expand", "alpha-sweep", "alpha-sweep"]);
}

#[test]
fn fixed_seeds_reproduce_csv_bytes() {
    let (dir, cfg) = setup();
    prepare(&cfg);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["ppo-train", "--config", s(&cfg), "--out", s(d)]);
    }
    assert_eq!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
    let ck = dir.path().join("out/checkpoint.json");
    for d in [&a, &b] {
        ok(&["eval", "--config", s(&cfg), "--out", s(d), "--checkpoint", s(&ck)]);
    }
    assert_eq!(
        fs::read(a.join("eval.csv")).unwrap(),
        fs::read(b.join("eval.csv")).unwrap()
    );
}

#[test]
fn missing_checkpoint_exits_1_naming_flag() {
    let (dir, cfg) = setup();
    let out = lab(&[
        "eval",
        "--config",
        s(&cfg),
        "--checkpoint",
        s(&dir.path().join("nope.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--checkpoint"));
}

#[test]
fn usage_errors_exit_1() {
    let (_dir, cfg) = setup();
    assert_eq!(lab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lab(&["eval", "--bogus"]).status.code(), Some(1));
    let out = lab(&["ablate", "--config", s(&cfg), "--variants", "no-selector"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no-selector"));
    let out = lab(&["eval", "--config", "/nonexistent/c.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--config"));
    assert_eq!(lab(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_value_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[reward]\nalpha = -1.0\n").unwrap();
    let out = lab(&["gen-corpus", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("alpha"));
}

#[test]
fn corrupt_data_exits_2() {
    let (dir, cfg) = setup();
    fs::create_dir_all(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/corpus.jsonl"), "not json\n").unwrap();
    let out = lab(&["gen-queries", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn divergence_exits_3_and_saves_last_good() {
    let (dir, cfg) = setup();
    prepare(&cfg);
    let text = SMALL
        .replace("learning_rate = 0.01", "learning_rate = 1e6")
        .replace("value_learning_rate = 0.001", "value_learning_rate = 1e6")
        .replace("total_steps = 4", "total_steps = 50")
        .replace("policy_freeze_steps = 2", "policy_freeze_steps = 0");
    fs::write(&cfg, text).unwrap();
    let out = lab(&["ppo-train", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(dir.path().join("out/checkpoint_last_good.json").exists());
}

#[test]
fn benchmark_ppo_then_eval_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let bench = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/benchmark.toml");
    let conf_dir = dir.path().join("configs");
    fs::create_dir_all(&conf_dir).unwrap();
    let cfg = conf_dir.join("benchmark.toml");
    fs::copy(bench, &cfg).unwrap();
    prepare(&cfg);
    ok(&["ppo-train", "--config", s(&cfg)]);
    ok(&["eval", "--config", s(&cfg)]);
    let out_dir = dir.path().join("out/benchmark");
    let mut rdr = csv_lines(&out_dir.join("metrics.csv"));
    let header = rdr.remove(0);
    let col = header.split(',').position(|c| c == "mean_return").unwrap();
    assert_eq!(rdr.len(), 250);
    assert!(rdr
        .iter()
        .all(|l| l.split(',').nth(col).unwrap().parse::<f64>().unwrap().is_finite()));
    assert!(out_dir.join("eval.csv").exists());
}

fn csv_lines(p: &Path) -> Vec<String> {
    fs::read_to_string(p).unwrap().lines().map(String::from).collect()
}
