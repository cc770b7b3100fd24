use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn avalonplay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avalonplay")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn run_into(dir: &Path, extra: &[&str]) -> String {
    let path = dir.to_str().unwrap();
    let mut args = vec!["run", "--games", "3", "--seed", "9", "--out", path];
    args.extend_from_slice(extra);
    ok(&avalonplay(&args))
}

#[test]
fn run_then_replay_metrics_and_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let table = run_into(dir.path(), &[]);
    assert!(table.contains("team acc:"), "{table}");
    for g in 0..3 {
        let file = dir.path().join(format!("game-{g:05}.jsonl"));
        assert!(ok(&avalonplay(&["replay", file.to_str().unwrap()])).contains("replay ok"));
    }

    let json = ok(&avalonplay(&["metrics", dir.path().to_str().unwrap(), "--json"]));
    let m: serde_json::Value = serde_json::from_str(&json).unwrap();
    let written: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m, written);
    assert_eq!(m["n_games"], 3);

    let findings = dir.path().join("findings.jsonl");
    let out = avalonplay(&["analyze", dir.path().to_str().unwrap(), "--out", findings.to_str().unwrap()]);
    ok(&out);
    assert!(fs::read_to_string(&findings).unwrap().is_empty());
}

#[test]
fn same_seed_writes_identical_records() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(a.path(), &["--communication", "off"]);
    run_into(b.path(), &["--communication", "off", "--parallelism", "2"]);
    let name = "game-00001.jsonl";
    assert_eq!(
        fs::read_to_string(a.path().join(name)).unwrap(),
        fs::read_to_string(b.path().join(name)).unwrap()
    );
}

#[test]
fn bad_arguments_fail_cleanly() {
    assert!(!avalonplay(&["run", "--just", "oracle"]).status.success());
    assert!(!avalonplay(&["run", "--reveal-counts", "maybe"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let out = avalonplay(&["run", "--games", "1", "--just", "llm", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--llm-base-url"));
    assert!(!avalonplay(&["replay", "/nonexistent/game.jsonl"]).status.success());
}
