use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

fn vcesim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vcesim"))
}

#[test]
fn missing_out_is_usage_error() {
    let out = vcesim().args(["run", "--k", "4"]).output().unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
}

#[test]
fn unknown_flag_rejected() {
    let out = vcesim().args(["run", "--bogus", "1", "--out", "x"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn malformed_config_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "k = 4\nthis line has no equals sign\n").unwrap();
    let out = vcesim()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn desk_run_writes_four_algorithms_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("desk.cfg");
    fs::write(&cfg, "topology = fat-tree\nk = 4\npattern = random\nlength = 400\nseeds = 1\n").unwrap();
    let out_dir = dir.path().join("out");
    let start = Instant::now();
    let out = vcesim()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--algs", "all", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(start.elapsed() < Duration::from_secs(30));
    for alg in ["greedy", "covce", "covceload", "gvop"] {
        for kind in ["decisions", "metrics", "windows"] {
            let p = out_dir.join(format!("seed_1/{alg}_{kind}.csv"));
            assert!(p.is_file(), "{}", p.display());
        }
    }
    let metrics = fs::read_to_string(out_dir.join("averaged/greedy_metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 401);
}

#[test]
fn inline_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = vcesim()
        .args(["run", "--topology", "bcube", "--n", "3", "--k", "1", "--pattern", "wave"])
        .args(["--length", "20", "--seeds", "1,2", "--algs", "greedy,covce", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("topology = bcube"));
    assert!(manifest.contains("pattern = wave"));
    assert!(manifest.contains("algs = greedy,covce"));
    assert!(!Path::new(&out_dir.join("seed_1/gvop_metrics.csv")).exists());
}

#[test]
fn verify_passes() {
    let out = vcesim().args(["verify", "--instances", "5"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failures"));
}

#[test]
fn dump_topology_prints_edge_list() {
    let out = vcesim().args(["dump-topology", "--k", "4"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let g = vcesim_core::SubstrateGraph::from_edge_list(&text).unwrap();
    assert_eq!(g.node_count(), 36);
    assert_eq!(g.edge_count(), 48);
}

#[test]
fn cost_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let out = vcesim()
        .args(["build-cost-table", "--k", "4", "--experiments", "2", "--requests", "100", "--out"])
        .arg(&table)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("n_vms,bandwidth,compute,phi,samples\n"));

    let out_dir = dir.path().join("o");
    let out = vcesim()
        .args(["run", "--k", "4", "--pattern", "vcesize", "--length", "20", "--algs", "greedy"])
        .arg("--set")
        .arg(format!("cost_table={}", table.display()))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(out_dir.join("cost_table.csv")).unwrap(), text);
}
