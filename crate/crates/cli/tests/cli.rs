use std::path::Path;
use std::process::{Command, Output};

use comamba_core::io::{load_feature_stack, save_feature_stack};
use comamba_core::random::random_tensor;
use comamba_core::FeatureStack;

fn comamba(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_comamba")).args(args).env_remove("COMAMBA_THREADS").output().unwrap()
}

fn write_stack(path: &Path, shape: &[usize], seed: u64) {
    save_feature_stack(&FeatureStack::new(random_tensor(shape, seed)).unwrap(), path).unwrap();
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bench_writes_one_row_per_k() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let o = comamba(&[
        "bench", "--method", "comamba", "--k-list", "1,2,4,8", "--h", "32", "--w", "32", "--c", "64", "--repeats", "5",
        "--out", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,K,flops,latency_ns,peak_bytes");
    assert_eq!(lines.len(), 5);
    let ks: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ks, ["1", "2", "4", "8"]);
    let parsed = comamba_core::bench::parse_csv(&text).unwrap();
    assert_eq!(comamba_core::bench::to_csv(&parsed), text);
}

#[test]
fn bench_to_stdout() {
    let o = comamba(&["bench", "--method", "attention", "--k-list", "1,2", "--h", "4", "--w", "4", "--c", "4", "--repeats", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("method,K,flops,latency_ns,peak_bytes\nattention,1,"));
    assert!(stderr(&o).contains("repeats=1"));
}

#[test]
fn fuse_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (ego, cav, out) = (dir.path().join("ego.cmfm"), dir.path().join("cav.cmfm"), dir.path().join("out.cmfm"));
    write_stack(&ego, &[1, 5, 6, 8], 1);
    write_stack(&cav, &[2, 5, 6, 8], 2);
    let o = comamba(&[
        "fuse", "--ego", ego.to_str().unwrap(), "--cav", cav.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--state-size", "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(load_feature_stack(&out).unwrap().tensor().shape(), &[1, 5, 6, 8]);
    assert!(stdout(&o).contains("fused 3 agents"));
}

#[test]
fn fuse_height_mismatch_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let (ego, cav, out) = (dir.path().join("ego.cmfm"), dir.path().join("cav.cmfm"), dir.path().join("out.cmfm"));
    write_stack(&ego, &[1, 5, 6, 8], 1);
    write_stack(&cav, &[1, 4, 6, 8], 2);
    let o = comamba(&["fuse", "--ego", ego.to_str().unwrap(), "--cav", cav.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dimension mismatch"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn fuse_corrupt_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let ego = dir.path().join("ego.cmfm");
    std::fs::write(&ego, b"NOPE0000").unwrap();
    let o = comamba(&["fuse", "--ego", ego.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("format error at byte 0"));
}

#[test]
fn demo_is_deterministic() {
    let a = comamba(&["demo", "--seed", "7"]);
    let b = comamba(&["demo", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("detections:"));
}

#[test]
fn demo_without_cavs() {
    let o = comamba(&["demo", "--seed", "1", "--cavs", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ego + 0 connected"));
}

#[test]
fn demo_from_scene_file() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("s.txt");
    std::fs::write(
        &scene,
        "# one cluster seen by a neighbour\npose 1 1 0 0 5  0 1 0 0  0 0 1 0  0 0 0 1\npoint 0.1 0.1 1 0.5\npoint 0.2 0.1 1 0.5\n",
    )
    .unwrap();
    let o = comamba(&["demo", "--scene", scene.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("points: agent1=2 at (5.00, 0.00)"), "{}", stdout(&o));
    assert!(stdout(&o).contains("detections: 1"), "{}", stdout(&o));
    std::fs::write(&scene, "point 1 2\n").unwrap();
    let bad = comamba(&["demo", "--scene", scene.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("line 1"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(comamba(&["launch"]).status.code(), Some(2));
    assert_eq!(comamba(&["demo", "--speed", "3"]).status.code(), Some(2));
    assert_eq!(comamba(&["bench", "--method", "rnn"]).status.code(), Some(2));
    assert_eq!(comamba(&[]).status.code(), Some(2));
}

#[test]
fn verify_reports_every_check() {
    let o = comamba(&["verify", "--json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.matches("\"status\": \"pass\"").count() >= 15);
    assert!(!text.contains("\"fail\""));
}

#[test]
fn config_file_and_thread_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.conf");
    std::fs::write(&cfg, "h = 4\nw = 4\nc = 4\nrepeats = 1\nk_list = 1,2\n").unwrap();
    let o = comamba(&["--config", cfg.to_str().unwrap(), "bench", "--method", "comamba"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    let threaded = Command::new(env!("CARGO_BIN_EXE_comamba"))
        .args(["--config", cfg.to_str().unwrap(), "bench", "--method", "comamba"])
        .env("COMAMBA_THREADS", "2")
        .output()
        .unwrap();
    assert!(threaded.status.success());
    assert!(stderr(&threaded).contains("threads=2"));
    let bad = Command::new(env!("CARGO_BIN_EXE_comamba"))
        .args(["demo"])
        .env("COMAMBA_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    std::fs::write(&cfg, "flavour = 1\n").unwrap();
    assert_eq!(comamba(&["--config", cfg.to_str().unwrap(), "verify"]).status.code(), Some(1));
}
