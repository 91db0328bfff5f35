use std::path::Path;
use std::process::{Command, Output};

use aego::pipeline::{AegoConfig, RunReport};

fn aego(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aego")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = aego(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const TINY: &[&str] = &[
    "--problem", "c3", "--n", "6", "--m", "2", "--samples", "16", "--lambda", "3", "--mu", "2", "--nu", "4",
    "--generations", "3", "--epochs", "2", "--seed", "9",
];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(TINY).chain(tail).copied().collect()
}

#[test]
fn defaults_print_a_loadable_config() {
    let text = ok(&["defaults", "c1", "--fast"]);
    let cfg = AegoConfig::from_toml(&text).unwrap();
    assert_eq!(cfg, AegoConfig::preset(aego::bench::ProblemId::C1, 100, 5).fast());
}

#[test]
fn run_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&with(&["run"], &["--out", out]));
    let report = RunReport::from_toml(&std::fs::read_to_string(dir.path().join("report.toml")).unwrap()).unwrap();
    assert!(report.error.is_none());
    assert_eq!(report.n, 6);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("n_F,best_cost,phase\n"));
    assert!(trace.lines().last().unwrap().ends_with(",post"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    let mut cfg = AegoConfig::preset(aego::bench::ProblemId::C4, 6, 2);
    cfg.samples = 10;
    cfg.lambda = 2;
    cfg.mu = 1;
    cfg.nu = 1;
    cfg.de.generations = 2;
    cfg.train.epochs = 1;
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let out = dir.path().join("run");
    ok(&["run", "--config", path.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()]);
    let report = RunReport::from_toml(&std::fs::read_to_string(out.join("report.toml")).unwrap()).unwrap();
    let used = report.config.unwrap();
    assert_eq!(used.master_seed, 4);
    assert_eq!(used.samples, 10);
}

#[test]
fn staged_commands_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let (train, weights) = (p("train.txt"), p("ae.txt"));
    ok(&with(&["gen-train"], &["--save", &train]));
    assert!(Path::new(&train).exists());
    let msg = ok(&with(&["train-ae"], &["--train", &train, "--save", &weights]));
    assert!(msg.contains("final reconstruction loss"));
    let latent = ok(&with(&["optimize-latent"], &["--weights", &weights]));
    let z = latent.lines().find_map(|l| l.strip_prefix("z_star = ")).unwrap().to_string();
    let post = ok(&with(&["post"], &["--weights", &weights, "--z", &z]));
    assert!(post.contains("cost = "));
    let pca = ok(&["analyze-pca", "--train", &train]);
    assert!(pca.starts_with("source,dataset,m,loss,variance_ratio\n"));
    assert_eq!(pca.lines().count(), 1 + 2 * 6);
}

#[test]
fn c1_instance_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("c1.txt");
    let inst = inst.to_str().unwrap();
    ok(&["build-c1", "--n", "8", "--manifold-dim", "2", "--minima", "20", "--radius", "0.1", "--out", inst]);
    let args = ["run", "--problem", "c1", "--n", "8", "--m", "2", "--samples", "10", "--lambda", "2", "--mu", "1",
        "--nu", "1", "--generations", "2", "--epochs", "1", "--instance", inst];
    let text = ok(&args);
    assert!(text.contains("final_cost"));
    // Dimension mismatch with the saved instance is an error.
    let mut bad = args.to_vec();
    bad[4] = "9";
    assert!(!aego(&bad).status.success());
}

#[test]
fn bad_input_fails_cleanly() {
    assert!(!aego(&["run", "--problem", "c9"]).status.success());
    let out = aego(&["run", "--problem", "c2", "--m", "0"]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
