use std::path::Path;
use std::process::{Command, Output};

fn sforest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sforest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn gen_ladder(dir: &Path) -> String {
    let p = dir.join("ladder.stpf");
    let out = sforest(&["gen", "--fixture", "ladder", "--rungs", "4", "-o", p.to_str().unwrap()]);
    assert!(out.status.success());
    p.to_str().unwrap().to_owned()
}

#[test]
fn solve_prints_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let file = gen_ladder(dir.path());
    let out = sforest(&["solve", &file]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["f1", "f2", "f3", "best", "best_cost", "duals", "plan", "autarkic"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v.get("timings").is_none());
}

#[test]
fn solve_with_exact_adds_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let file = gen_ladder(dir.path());
    let out = sforest(&["solve", &file, "--exact", "--timings"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.get("diagnostics").is_some());
    assert!(v.get("timings").is_some());
}

#[test]
fn trace_and_verify_succeed_on_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("path.stpf");
    let path = p.to_str().unwrap();
    assert!(sforest(&["gen", "--fixture", "path", "-o", path]).status.success());
    let trace = sforest(&["trace", path, "--epsilon", "1/10"]);
    assert!(trace.status.success());
    serde_json::from_slice::<serde_json::Value>(&trace.stdout).unwrap();
    let verify = sforest(&["verify", path, "--epsilon", "1/10"]);
    assert_eq!(verify.status.code(), Some(0));
}

#[test]
fn gen_is_seeded() {
    let a = sforest(&["gen", "--n", "8", "--seed", "5"]);
    let b = sforest(&["gen", "--n", "8", "--seed", "5"]);
    let c = sforest(&["gen", "--n", "8", "--seed", "6"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn bench_writes_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    gen_ladder(dir.path());
    for seed in ["1", "2"] {
        let p = dir.path().join(format!("r{seed}.stpf"));
        assert!(sforest(&["gen", "--n", "7", "--seed", seed, "-o", p.to_str().unwrap()]).status.success());
    }
    let out = sforest(&["bench", dir.path().to_str().unwrap(), "--csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("instance,vertices,edges,demands,f1,f2,f3,best,exact,ratio"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.stpf", "this is not an instance\n");
    assert_eq!(sforest(&["solve", &bad]).status.code(), Some(1));
    let split = write(
        dir.path(),
        "split.stpf",
        "STPF 1\nSECTION Graph\nV 3\nE 1 2 1\nEND\nSECTION Demands\nD 1 3\nEND\n",
    );
    assert_eq!(sforest(&["solve", &split]).status.code(), Some(2));
    let missing = dir.path().join("nope.stpf");
    assert_eq!(sforest(&["solve", missing.to_str().unwrap()]).status.code(), Some(1));
    let big = dir.path().join("big.stpf");
    assert!(sforest(&["gen", "--n", "14", "--density", "0.9", "-o", big.to_str().unwrap()]).status.success());
    assert_eq!(sforest(&["exact", big.to_str().unwrap(), "--max-edges", "5", "--max-terminals", "1"]).status.code(), Some(3));
}
