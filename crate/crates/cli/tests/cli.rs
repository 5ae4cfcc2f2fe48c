use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use zklab::output::verify_run;

fn zklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zklab")).args(args).env_remove("ZKLAB_ENUM_LIMIT").output().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn hash_audit_counts_members() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("audit");
    let o = zklab(&["hash-audit", "--n1", "2", "--n2", "2", "--t", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["result"]["family_size"], 64);
    assert_eq!(r["passed"], true);
    assert!(verify_run(&out).unwrap());
}

#[test]
fn witness_extraction_accepts_with_certainty() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("z");
    let o = zklab(&["extract", "zq3", "--vertices", "3", "--pair", "iso", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let q = report(&out)["result"]["q"].as_f64().unwrap();
    assert!((q - 1.0).abs() < 1e-10);
    assert!(out.join("chain.csv").exists() && out.join("s_table.csv").exists());
}

#[test]
fn config_file_and_flags_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "vertices = 3\npair = \"noniso\"\nsim_kind = \"guess\"\n").unwrap();
    let out = tmp.path().join("z");
    let o = zklab(&["extract", "zq3", "--config", cfg.to_str().unwrap(), "--sim-kind", "commit", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let q = report(&out)["result"]["q"].as_f64().unwrap();
    assert!((q - 0.75).abs() < 1e-10, "flag should override the file: q = {q}");
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    let limit = zklab(&["extract", "zq3", "--pair", "noniso", "--enum-limit", "16", "--out", &p("a")]);
    assert_eq!(limit.status.code(), Some(3));
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let config = zklab(&["hash-audit", "--config", bad.to_str().unwrap(), "--out", &p("b")]);
    assert_eq!(config.status.code(), Some(2));
    let budget = zklab(&["extract", "zq3", "--t", "0", "--out", &p("c")]);
    assert_eq!(budget.status.code(), Some(3));
    assert!(!tmp.path().join("a").exists() && !tmp.path().join("c").exists());
}

#[test]
fn runs_refuse_non_empty_output() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("keep.txt"), "x").unwrap();
    let o = zklab(&["hash-audit", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(std::fs::read_to_string(tmp.path().join("keep.txt")).unwrap(), "x");
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = zklab(&[
            "extract", "zq3", "--pair", "noniso", "--sim-kind", "commit", "--mode", "mc", "--samples", "500",
            "--seed", "9", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("report.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn plot_collects_grover_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = tmp.path().join("grover");
    assert!(zklab(&["searchlab", "grover", "--t", "3", "--n2", "2", "--out", sweep.to_str().unwrap()]).status.success());
    let plot = tmp.path().join("plot");
    let o = zklab(&["plot", sweep.join("report.json").to_str().unwrap(), "--out", plot.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(plot.join("plot.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for (t, row) in rows.iter().enumerate() {
        let y: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        let expect = ((2 * t + 1) as f64 * 0.5f64.asin()).sin().powi(2);
        assert!((y - expect).abs() < 1e-9);
    }
    let empty = tmp.path().join("empty");
    assert!(zklab(&["plot", "--out", empty.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read_to_string(empty.join("plot.csv")).unwrap().trim(), "series,x,y");
}
