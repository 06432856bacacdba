use std::process::Command;

use serde_json::Value;

fn riesz(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_riesz")).args(args).env_remove("RIESZ_SEED").output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn lines(stdout: &str) -> Vec<Value> {
    stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn density_emits_header_then_records() {
    let (code, out, err) = riesz(&["density", "--scenario", "gauss-identity-d1", "--x", "0", "--n", "20000", "--seed", "7"]);
    assert_eq!(code, 0, "{err}");
    let v = lines(&out);
    assert_eq!(v.len(), 2);
    assert_eq!(v[0]["seed"], 7);
    assert_eq!(v[0]["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v[1]["kind"], "density");
    assert_eq!(v[1]["N"], 20000);
    assert!((v[1]["value"].as_f64().unwrap() - 0.3989).abs() < 0.03);
    assert!(!err.is_empty());
}

#[test]
fn quiet_silences_summaries_and_output_is_deterministic() {
    let args = ["density", "--scenario", "linear", "--x", "0.1,0.2", "--n", "5000", "--quiet"];
    let (c1, o1, e1) = riesz(&args);
    let (_, o2, _) = riesz(&args);
    assert_eq!(c1, 0);
    assert!(e1.is_empty());
    assert_eq!(o1, o2);
}

#[test]
fn env_seed_sits_between_config_and_flags() {
    let run = |seed_env: &str, extra: &[&str]| {
        let mut args = vec!["density", "--scenario", "linear", "--x", "0,0", "--n", "2000", "--quiet"];
        args.extend_from_slice(extra);
        let out = Command::new(env!("CARGO_BIN_EXE_riesz")).args(&args).env("RIESZ_SEED", seed_env).output().unwrap();
        lines(&String::from_utf8(out.stdout).unwrap())[0]["seed"].as_u64().unwrap()
    };
    assert_eq!(run("31", &[]), 31);
    assert_eq!(run("31", &["--seed", "5"]), 5);
}

#[test]
fn constants_and_distance() {
    let (code, out, _) = riesz(&["constants", "--d", "2", "--p", "4", "--quiet"]);
    assert_eq!(code, 0);
    assert!(out.contains("73"), "{out}");
    let (code, out, _) =
        riesz(&["distance", "--scenario", "gauss-identity-d2", "--x", "0,0", "--y", "1,0", "--res", "61", "--quiet"]);
    assert_eq!(code, 0);
    let v = lines(&out);
    let d = v.iter().find(|r| r["kind"] == "distance").expect("distance record");
    assert!((d["value"].as_f64().unwrap() - 0.5).abs() < 0.01, "{d}");
}

#[test]
fn exit_codes() {
    assert_eq!(riesz(&["density", "--scenario", "nope", "--x", "0"]).0, 1);
    assert_eq!(riesz(&["density", "--scenario", "linear", "--x", "0,0", "--n", "0"]).0, 1);
    assert_eq!(riesz(&["frobnicate"]).0, 1);
    assert_eq!(riesz(&["--help"]).0, 0);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "scenario = \"gauss-identity-d1\"\n[estimator]\nN = 200\ndet_threshold = 2.0\n").unwrap();
    assert_eq!(riesz(&["density", "--config", cfg.to_str().unwrap(), "--x", "0", "--quiet"]).0, 2);
}

#[test]
fn grid_density_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("grid.csv");
    let json = dir.path().join("out.json");
    let (code, out, _) = riesz(&[
        "density", "--scenario", "gauss-identity-d2", "--grid", "--lo", "-1,-1", "--hi", "1,1", "--res", "8",
        "--n", "2000", "--csv", csv.to_str().unwrap(), "--out", json.to_str().unwrap(), "--quiet",
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x0,x1,value,stderr");
    assert_eq!(text.lines().count(), 65);
    assert_eq!(std::fs::read_to_string(&json).unwrap().lines().count(), 65);
}
