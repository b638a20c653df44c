use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plateau")).args(args).args(["--log-level", "error"]).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn chain(m: usize) -> String {
    let gates: Vec<String> = (0..m)
        .map(|i| format!(r#"{{"type":"rotation","generator":"{}0","param":{{"free":{i}}}}}"#, if i % 2 == 0 { "X" } else { "Y" }))
        .collect();
    format!(r#"{{"n_system":1,"gates":[{}]}}"#, gates.join(","))
}

const Z0: &str = r#"{"terms":[{"coeff":1.0,"pauli":"Z0"}]}"#;

#[test]
fn two_design_passes() {
    let o = run(&["verify", "two-design"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("X0 X1"));
}

#[test]
fn bounds_without_gadget_layer_fails_validation() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.json", &chain(2));
    let o = write(d.path(), "o.json", Z0);
    let out = run(&["analyze", "bounds", "--circuit", &c, "--observable", &o]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("missing gadget layer"));
}

#[test]
fn exact_over_cap_is_usage_error_with_hint() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.json", &chain(20));
    let o = write(d.path(), "o.json", Z0);
    let out = run(&["estimate", "var", "--circuit", &c, "--observable", &o, "--exact"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--samples"));
}

#[test]
fn exact_estimate_csv() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.json", &chain(1));
    let o = write(d.path(), "o.json", Z0);
    let out = run(&["estimate", "gradvar", "--circuit", &c, "--observable", &o, "--exact", "--all-params"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("quantity,param_index,mean,stderr,samples,seed"));
    assert_eq!(lines.next(), Some("gradvar,0,0.5,0.0,0,0"));
}

#[test]
fn monte_carlo_is_seeded() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.json", &chain(6));
    let o = write(d.path(), "o.json", Z0);
    let go = |seed: &str, threads: &str| run(&["estimate", "var", "--circuit", &c, "--observable", &o, "--samples", "2000", "--seed", seed, "--threads", threads]).stdout;
    let a = go("7", "1");
    assert!(!a.is_empty());
    assert_eq!(a, go("7", "1"));
    assert_ne!(a, go("8", "1"));
}

#[test]
fn malformed_input_and_usage() {
    let d = tempfile::tempdir().unwrap();
    let bad = write(d.path(), "bad.json", r#"{"n_system":1,"gates":[{"type":"rotation","generator":"X3","param":{"free":0}}]}"#);
    let out = run(&["circuit", "validate", "--circuit", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains('0'));
    assert_eq!(run(&["estimate", "frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["circuit", "validate", "--circuit", "/nonexistent/c.json"]).status.code(), Some(1));
}

#[test]
fn gadget_transform_roundtrip() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.json", &chain(3));
    let t = d.path().join("m.json");
    let out = run(&["transform", "gadget", "--circuit", &c, "--position", "1", "--op", "trainable", "--out", t.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = run(&["circuit", "validate", "--circuit", t.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
    let o = write(d.path(), "o.json", Z0);
    let b = run(&["analyze", "bounds", "--circuit", t.to_str().unwrap(), "--observable", &o, "--format", "json"]);
    assert_eq!(b.status.code(), Some(0), "{}", String::from_utf8_lossy(&b.stderr));
    let report: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert!(report["variance_lower"].as_f64().unwrap() > 0.0);
}

#[test]
fn bench_writes_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().to_str().unwrap();
    let out = run(&["bench", "tfi", "--n-min", "4", "--n-max", "4", "--blocks", "2", "--samples", "200", "--out", dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv1 = std::fs::read(d.path().join("results.csv")).unwrap();
    let manifest = d.path().join("manifest.json");
    let d2 = tempfile::tempdir().unwrap();
    let again = run(&["bench", "tfi", "--from-manifest", manifest.to_str().unwrap(), "--out", d2.path().to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0), "{}", String::from_utf8_lossy(&again.stderr));
    assert_eq!(csv1, std::fs::read(d2.path().join("results.csv")).unwrap());
}
