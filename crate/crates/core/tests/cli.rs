//! End-to-end runs of the `linking` binary.

use std::path::Path;
use std::process::Command;

fn linking(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_linking")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SADDLE: &str = r#"
[functional]
name = "saddle"

[decomposition]
v1 = [0]
v2 = [1]

[pair]
kind = "saddle"
radius = 2.0
resolution = 32
"#;

const DOUBLE_WELL: &str = r#"
[functional]
name = "double_well"

[pair]
kind = "mp_path"
rho = 0.5
start = [-1.0, 0.0]
e = [1.0, 0.0]
resolution = 64
"#;

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn link_verify_identity_saddle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "p.toml", SADDLE);
    let out = tmp.path().join("out");
    let (code, stdout) = linking(&["link-verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    let r = report(&out);
    assert!(r["results"]["linking"]["degrees"].as_array().unwrap().iter().all(|d| d == 1));
    assert!(r["results"]["intersection"]["residual"].as_f64().unwrap() <= 1e-3);
    assert!(out.join("trace.csv").exists());
}

#[test]
fn minimax_double_well_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "p.toml", &format!("{DOUBLE_WELL}\n[map]\nkind = \"random\"\namplitude = 0.4\n"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let (code, stdout) = linking(&["minimax", "--config", &cfg, "--seed", "3", "--out", dir.to_str().unwrap()]);
        assert_eq!(code, 0, "{stdout}");
    }
    let ja = std::fs::read(a.join("report.json")).unwrap();
    assert_eq!(ja, std::fs::read(b.join("report.json")).unwrap());
    let r = report(&a);
    assert_eq!(r["config"]["seed"], 3);
    assert!(r["results"]["minimax"]["c_estimate"].as_f64().unwrap().abs() <= 1e-4);
    let cand = r["results"]["minimax"]["candidate_critical"].as_array().unwrap();
    assert!(cand.iter().all(|x| x.as_f64().unwrap().abs() <= 1e-3));
    let hist = std::fs::read_to_string(a.join("history.csv")).unwrap();
    assert!(hist.starts_with("iteration,sup\n"));
    let (code, stdout) = linking(&["report", "--out", a.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("PASS"));
}

#[test]
fn ekeland_sweep_on_saddle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "p.toml", SADDLE);
    let out = tmp.path().join("out");
    let (code, stdout) =
        linking(&["ekeland", "--config", &cfg, "--eps", "0.2,0.1,0.05", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    let points = report(&out)["results"]["points"].as_array().unwrap().clone();
    assert_eq!(points.len(), 3);
    for p in points {
        let checks = p["point"]["bound_checks"].as_array().unwrap();
        assert!(checks.iter().all(|c| c["holds"] == true));
    }
}

#[test]
fn deform_writes_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "[functional]\nname = \"saddle\"\n[deform]\nd = [[1.0, 0.0], [-1.0, 0.0]]\ne = [[0.0, 1.0], [0.0, -1.0]]\neps_bar = 4.0\nverify_starts = 40\n";
    let cfg = write(tmp.path(), "p.toml", body);
    let out = tmp.path().join("out");
    let (code, stdout) = linking(&["deform", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,node,x0,x1,f,grad_norm\n"));
    assert!(trace.lines().count() > 3);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    let bad = write(tmp.path(), "bad.toml", "[functional]\nname = \"nope\"\n");
    assert_eq!(linking(&["minimax", "--config", &bad, "--out", o]).0, 2);
    let broken = write(tmp.path(), "broken.toml", "[functional\n");
    assert_eq!(linking(&["minimax", "--config", &broken, "--out", o]).0, 2);
    assert_eq!(linking(&["minimax", "--out", o]).0, 2);
    assert_eq!(linking(&["report", "--out", o]).0, 2);
    // a map that meets S where f < max on ∂Q violates the level bounds: numerical failure
    let neg = write(
        tmp.path(),
        "neg.toml",
        &SADDLE.replace("name = \"saddle\"", "name = \"saddle\"\nparams = { positive = 0 }"),
    );
    let (code, _) = linking(&["minimax", "--config", &neg, "--out", o]);
    assert_eq!(code, 3);
    let r = report(&out);
    assert!(r["error"].as_str().unwrap().starts_with("minimax:"));
    assert_eq!(r["all_pass"], false);
}
