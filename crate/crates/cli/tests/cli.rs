use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn exprank(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exprank"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(cwd: &Path, out: &str) {
    ok(exprank(&["synth", "--users", "50", "--num-items", "40", "--seed", "9", "--out", out], cwd));
}

const DATA: [&str; 4] = ["--interactions", "d/interactions.csv", "--items", "d/items.csv"];

fn with_data<'a>(cmd: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(DATA);
    v.extend(rest);
    v
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "a");
    synth(dir.path(), "b");
    for f in ["interactions.csv", "items.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn staged_commands_chain_together() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    synth(cwd, "d");

    let summary = ok(exprank(&with_data("ingest", &["--out", "ing"]), cwd));
    assert!(summary.contains("50 users"), "{summary}");
    for f in ["interactions.csv", "items.csv", "ids.csv", "train.csv", "test.csv"] {
        assert!(cwd.join("ing").join(f).exists(), "{f}");
    }

    ok(exprank(&with_data("train", &["--epochs", "3", "--out", "m"]), cwd));
    let loss = fs::read_to_string(cwd.join("m/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 4);

    ok(exprank(
        &with_data("rerank", &["--scores", "m/scores.csv", "--policy", "par", "--lambda", "0", "--out", "r/par.csv"]),
        cwd,
    ));
    ok(exprank(&with_data("rerank", &["--scores", "m/scores.csv", "--out", "r/base.csv"]), cwd));

    let hellinger = |rankings: &str| -> f64 {
        let text = ok(exprank(
            &with_data("evaluate", &["--rankings", rankings, "--policy", "par", "--out", "rep.csv"]),
            cwd,
        ));
        let line = text.lines().find(|l| l.starts_with("hellinger")).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    assert!(hellinger("r/par.csv") < hellinger("r/base.csv"));
    let report = fs::read_to_string(cwd.join("rep.csv")).unwrap();
    assert!(report.starts_with("user_id,ndcg,exposure_majority,exposure_minority,diversity,novelty"));

    let cal = ok(exprank(&with_data("calibrate", &["--scores", "m/scores.csv", "--budget", "0.1"]), cwd));
    assert!(cal.contains("chosen λ"), "{cal}");
    ok(exprank(
        &with_data("rerank", &["--scores", "m/scores.csv", "--calibrate", "--budget", "0.1", "--out", "r/cal.csv"]),
        cwd,
    ));
}

#[test]
fn experiment_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.conf"),
        "synth.users = 40\nsynth.items = 30\ntrain.epochs = 2\npolicy = par, int\nseed = 2\n",
    )
    .unwrap();
    let stdout = ok(exprank(&["experiment", "--config", "exp.conf", "--out", "res"], dir.path()));
    assert!(stdout.contains("par") && stdout.contains("int"), "{stdout}");
    let res = dir.path().join("res");
    for f in ["summary.txt", "scores.csv", "par/rankings.csv", "par/calibration.csv", "int/report.csv"] {
        assert!(res.join(f).exists(), "{f}");
    }
}

#[test]
fn bad_input_fails_with_one_line_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "user_id,item_id,timestamp\nu1,i1,notatime\n").unwrap();
    fs::write(dir.path().join("items.csv"), "item_id,provider_id,attribute,categories\n").unwrap();
    let out = exprank(&["ingest", "--interactions", "bad.csv", "--items", "items.csv", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains("bad.csv:2"), "{stderr}");
}

#[test]
fn unknown_flag_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = exprank(&["rerank", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}
