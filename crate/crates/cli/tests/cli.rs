use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
[scenario]
vehicle_count = 30
horizon = 40

[train]
episodes = 12

[evaluation]
seeds = [1, 2]
";

fn edgeplace(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgeplace"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = setup();
    let p = dir.path();
    ok(&edgeplace(&["generate", "--config", "small.toml", "--seed", "7", "--out", "a.csv"], p));
    ok(&edgeplace(&["generate", "--config", "small.toml", "--seed", "7", "--out", "b.csv"], p));
    ok(&edgeplace(&["generate", "--config", "small.toml", "--seed", "8", "--out", "c.csv"], p));
    let a = std::fs::read(p.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b.csv")).unwrap());
    assert_ne!(a, std::fs::read(p.join("c.csv")).unwrap());
}

#[test]
fn generate_prints_a_summary() {
    let dir = setup();
    let out = edgeplace(&["generate", "--config", "small.toml", "--out", "t.csv"], dir.path());
    ok(&out);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("vehicles:   30"), "{stdout}");
    assert!(stdout.contains("service 0: lambda min"), "{stdout}");
}

#[test]
fn missing_config_names_the_path() {
    let dir = setup();
    let out = edgeplace(&["generate", "--config", "absent.toml", "--out", "t.csv"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.toml"));
    assert!(!dir.path().join("t.csv").exists());
}

#[test]
fn invalid_config_exits_with_config_code() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.toml"), "[train]\nlearning_rate = -1.0\n").unwrap();
    let out = edgeplace(&["generate", "--config", "bad.toml", "--out", "t.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
}

#[test]
fn train_writes_one_loss_row_per_episode() {
    let dir = setup();
    let p = dir.path();
    ok(&edgeplace(&["train", "--config", "small.toml", "--checkpoint", "ck.json"], p));
    assert!(p.join("ck.json").exists());
    let loss = std::fs::read_to_string(p.join("ck.loss.csv")).unwrap();
    let mut lines = loss.lines();
    assert!(lines.next().unwrap().starts_with("episode,alpha,mean_loss"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn train_on_a_trace_file() {
    let dir = setup();
    let p = dir.path();
    ok(&edgeplace(&["generate", "--config", "small.toml", "--out", "t.csv"], p));
    ok(&edgeplace(
        &["train", "--config", "small.toml", "--trace", "t.csv", "--checkpoint", "ck.json", "--out", "loss.csv"],
        p,
    ));
    assert!(p.join("loss.csv").exists());
}

#[test]
fn single_scheme_evaluation_has_one_label() {
    let dir = setup();
    let p = dir.path();
    ok(&edgeplace(
        &["evaluate", "--config", "small.toml", "--schemes", "SSP_min", "--alpha", "0.5", "--out", "res"],
        p,
    ));
    let results = std::fs::read_to_string(p.join("res/results.csv")).unwrap();
    let labels: std::collections::BTreeSet<&str> =
        results.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels.into_iter().collect::<Vec<_>>(), ["SSP_min"]);
    assert!(p.join("res/summary.csv").exists());
    assert!(p.join("res/fig_delay_vs_alpha.csv").exists());
}

#[test]
fn drld_without_checkpoint_is_rejected() {
    let dir = setup();
    let out = edgeplace(&["evaluate", "--config", "small.toml", "--schemes", "DRLD-SP", "--out", "res"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));
}

#[test]
fn evaluate_and_compare_are_reproducible() {
    let dir = setup();
    let p = dir.path();
    ok(&edgeplace(&["train", "--config", "small.toml", "--checkpoint", "ck.json"], p));
    for out in ["r1", "r2"] {
        ok(&edgeplace(
            &["evaluate", "--config", "small.toml", "--checkpoint", "ck.json", "--alpha", "0.2,1.0", "--out", out],
            p,
        ));
    }
    let r1 = std::fs::read(p.join("r1/results.csv")).unwrap();
    assert_eq!(r1, std::fs::read(p.join("r2/results.csv")).unwrap());
    assert_eq!(
        std::fs::read(p.join("r1/summary.csv")).unwrap(),
        std::fs::read(p.join("r2/summary.csv")).unwrap()
    );

    let cmp = edgeplace(&["compare", "r1"], p);
    ok(&cmp);
    let table = String::from_utf8(cmp.stdout).unwrap();
    for label in ["DRLD-SP", "SSP_min", "SSP_max", "AR_min", "AR_max", "TBR_min", "TBR_max"] {
        assert!(table.contains(label), "{label} missing:\n{table}");
    }
}

#[test]
fn compare_on_missing_directory_fails() {
    let dir = setup();
    let out = edgeplace(&["compare", "nowhere"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}
