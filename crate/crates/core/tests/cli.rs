use std::fs;
use std::path::Path;

use pokerlab_core::cli::run;

fn call(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["pokerlab", "--out", out.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

#[test]
fn br_table_kuhn_id() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call(dir.path(), &["br-table", "--game", "kuhn", "--pool", "id"]), 0);
    let csv = fs::read_to_string(dir.path().join("br_table_kuhn.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines[1].starts_with("f,1.000000,"));
}

#[test]
fn solve_writes_policy_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call(dir.path(), &["solve", "--game", "kuhn", "--alpha", "0.2"]), 0);
    let summary = fs::read_to_string(dir.path().join("solve_kuhn_summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("kuhn,closed_form,0.2,-0.055556,"));
    assert!(dir.path().join("solve_kuhn.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call(dir.path(), &["solve", "--game", "kuhn", "--alpha", "0.3334"]), 3);
    assert_eq!(call(dir.path(), &["shuffle"]), 2);
    assert_eq!(call(dir.path(), &["train", "--config", "/nonexistent/config.toml"]), 3);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "game = \"kuhn\"\nlearning_rat = 0.1\n").unwrap();
    assert_eq!(call(dir.path(), &["train", "--config", bad.to_str().unwrap()]), 3);
    assert_eq!(call(dir.path(), &["eval", "--checkpoint", "/nonexistent.json"]), 1);
}

#[test]
fn ne_vs_toys_kuhn_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call(dir.path(), &["--seed", "7", "ne-vs-toys", "--game", "kuhn"]), 0);
    let csv = fs::read_to_string(dir.path().join("ne_vs_toys_kuhn.csv")).unwrap();
    assert!(csv.contains("aggregate,id,,,+0.079008"));
}

#[test]
fn gradcheck_reports_small_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call(dir.path(), &["--seed", "3", "gradcheck", "--game", "kuhn", "--samples", "40"]), 0);
    let csv = fs::read_to_string(dir.path().join("gradcheck_kuhn.csv")).unwrap();
    let err: f64 = csv.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(
        &config,
        "game = \"kuhn\"\nepochs = 1\ncheckpoint_every = 1\nenvs_per_opponent = 1\nepisode_length = 8\n\
         train_steps = 1\nminibatches = 1\nbatch_size = 8\nleague_match_hands = 10\neval_hands = 10\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    assert_eq!(call(&out, &["train", "--config", config.to_str().unwrap()]), 0);
    assert!(out.join("metrics.csv").exists());
    let ckpt = out.join("final.json");
    assert_eq!(
        call(
            &out,
            &["eval", "--checkpoint", ckpt.to_str().unwrap(), "--pool", "ood", "--mode", "masked", "--hands", "50"]
        ),
        0
    );
    let csv = fs::read_to_string(out.join("eval_kuhn_masked.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 7 + 1);
}
