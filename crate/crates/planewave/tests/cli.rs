//! Runs the `planewave` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_planewave"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scenario(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

const SMALL: &str = r#"{
    "name": "small",
    "n_realizations": 10,
    "grid": {"receive": [8, 8], "source": [8, 8]},
    "receivers": {"line": {"n": 8, "spacing": 0.25}},
    "sources": {"line": {"n": 8, "spacing": 0.25}}
}"#;

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn synthesize_shapes_and_manifests() {
    let t = tempfile::tempdir().unwrap();
    let sc = scenario(t.path(), "s.json", SMALL);
    let out = t.path().join("o");
    let o = run(&["synthesize", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("channel.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 10 * 8 * 8);
    assert_eq!(csv.lines().next().unwrap(), "realization,receiver,source,re,im");
    let blob = fs::read(out.join("channel.c64")).unwrap();
    assert_eq!(blob.len(), 10 * 8 * 8 * 8);
    for f in ["channel.csv", "channel.c64"] {
        let m = json(&out.join(format!("{f}.manifest.json")));
        assert_eq!(m["file"], f);
        assert_eq!(m["seed"], 0, "missing seed defaults to 0 and is recorded");
        assert_eq!(m["shape"], serde_json::json!([10, 8, 8]));
        assert_eq!(m["receive_grid"]["nodes"], 64);
        assert_eq!(m["library"]["name"], "planewave");
        assert_eq!(m["config_hash"].as_str().unwrap().len(), 16);
        assert_eq!(m["receivers"].as_array().unwrap().len(), 8);
        assert_eq!(m["bytes"].as_u64().unwrap(), fs::metadata(out.join(f)).unwrap().len());
    }
    // The blob holds the CSV values rounded to f32.
    let first = csv.lines().nth(1).unwrap().split(',').map(str::to_owned).collect::<Vec<_>>();
    let re = f32::from_le_bytes(blob[0..4].try_into().unwrap());
    assert_eq!(re, first[3].parse::<f64>().unwrap() as f32);
}

#[test]
fn synthesize_is_deterministic_across_runs_and_threads() {
    let t = tempfile::tempdir().unwrap();
    let sc = scenario(t.path(), "s.json", SMALL);
    let mut outs = Vec::new();
    for (k, threads) in ["1", "2", "2"].iter().enumerate() {
        let out = t.path().join(format!("o{k}"));
        let o = run(&["synthesize", "--scenario", sc.to_str().unwrap(), "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outs.push(out);
    }
    for f in ["channel.csv", "channel.c64", "channel.csv.manifest.json", "channel.c64.manifest.json"] {
        let a = fs::read(outs[0].join(f)).unwrap();
        assert_eq!(a, fs::read(outs[1].join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(outs[2].join(f)).unwrap(), "{f}");
    }
    let other = t.path().join("seeded");
    let o = run(&["synthesize", "--scenario", sc.to_str().unwrap(), "--seed", "9", "--out", other.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(outs[0].join("channel.c64")).unwrap(), fs::read(other.join("channel.c64")).unwrap());
    assert_eq!(json(&other.join("channel.c64.manifest.json"))["seed"], 9);
}

#[test]
fn configuration_errors_exit_2_with_field_path() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("o");
    let zero = scenario(t.path(), "z.json", r#"{"n_realizations": 0}"#);
    let o = run(&["synthesize", "--scenario", zero.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_realizations"), "{}", stderr(&o));

    let unknown = scenario(t.path(), "u.json", r#"{"n_realizations": 2, "grid": {"mode": "polar", "size": 3}}"#);
    let o = run(&["synthesize", "--scenario", unknown.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("grid"), "{}", stderr(&o));

    let o = run(&["synthesize", "--preset", "nope", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["synthesize", "--scenario", t.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["validate", "--preset", "isotropic", "--only", "bogus", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn oversized_request_exits_3() {
    let t = tempfile::tempdir().unwrap();
    let big = scenario(
        t.path(),
        "b.json",
        r#"{"n_realizations": 1, "grid": {"receive": [8, 8], "source": [8, 8]},
            "receivers": {"rectangle": {"nx": 100, "ny": 100, "spacing": 0.1}},
            "sources": {"rectangle": {"nx": 100, "ny": 100, "spacing": 0.1}}}"#,
    );
    let o = run(&["synthesize", "--scenario", big.to_str().unwrap(), "--out", t.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("guard"));
}

#[test]
fn acf_overlay_only_for_isotropic() {
    let t = tempfile::tempdir().unwrap();
    let iso = scenario(
        t.path(),
        "i.json",
        r#"{"n_realizations": 200, "grid": {"receive": [16, 16], "source": [8, 8]},
            "receivers": {"line": {"n": 9, "spacing": 0.125}}, "sources": {"points": [[0, 0, 0]]}}"#,
    );
    let out = t.path().join("iso");
    let o = run(&["acf", "--scenario", iso.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("max |emp − sinc|"));
    let csv = fs::read_to_string(out.join("acf.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "lag_lambda,correlation,clarke");
    assert_eq!(lines.next().unwrap(), "0.0,1.0,1.0");
    assert_eq!(csv.lines().count(), 1 + 9);
    let report = json(&out.join("acf.json"));
    assert!(report["max_abs_error_vs_clarke"].as_f64().unwrap() < 0.1);
    assert!(out.join("acf.json.manifest.json").exists());

    let aniso = scenario(
        t.path(),
        "a.json",
        r#"{"n_realizations": 50, "grid": {"receive": [16, 16], "source": [8, 8]},
            "receive": {"vmf": [{"theta_deg": 45, "phi_deg": 0, "nu2": 0.01}]},
            "receivers": {"line": {"n": 5, "spacing": 0.125}}, "sources": {"points": [[0, 0, 0]]}}"#,
    );
    let out = t.path().join("aniso");
    let o = run(&["acf", "--scenario", aniso.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("acf.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "lag_lambda,correlation");
    assert!(json(&out.join("acf.json"))["clarke"].is_null());
}

#[test]
fn validate_suite_passes_on_isotropic() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("v");
    let o = run(&["validate", "--preset", "isotropic", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}\n{}", stdout(&o), stderr(&o));
    let report = json(&out.join("validation.json"));
    assert_eq!(report["pass"], true);
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), 12);
    for r in results {
        for key in ["test", "statistic", "threshold", "pass", "n", "seed"] {
            assert!(r.get(key).is_some(), "{key} missing in {r}");
        }
        assert_eq!(r["skipped"], false, "{r}");
    }
}

#[test]
fn validate_only_routes_to_one_check() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("v");
    let o = run(&["validate", "--preset", "fig8c", "--only", "weyl", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let results = json(&out.join("validation.json"))["results"].as_array().unwrap().clone();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0]["test"], "weyl");
}

#[test]
fn evanescent_injection_fails_stationarity() {
    let t = tempfile::tempdir().unwrap();
    let sc = scenario(
        t.path(),
        "inj.json",
        r#"{"n_realizations": 1, "grid": {"receive": [16, 16], "source": [8, 8]},
            "injection": {"kx": 1.2, "amplitude": 1.0}, "validation": {"n_realizations": 300}}"#,
    );
    let out = t.path().join("v");
    let o = run(&["validate", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stderr(&o).contains("stationarity"));
    let report = json(&out.join("validation.json"));
    let st = report["results"].as_array().unwrap().iter().find(|r| r["test"] == "stationarity").unwrap().clone();
    assert_eq!(st["pass"], false);
    assert!(st["statistic"].as_f64().unwrap() > 3.0);
}

#[test]
fn planar_scenario_validates() {
    let t = tempfile::tempdir().unwrap();
    let sc = scenario(t.path(), "p.json", r#"{"n_realizations": 1, "model": "scalar2d", "validation": {"n_realizations": 600}}"#);
    let o = run(&["validate", "--scenario", sc.to_str().unwrap(), "--out", t.path().join("v").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("SKIP clarke"));
}

#[test]
fn angular_export() {
    let t = tempfile::tempdir().unwrap();
    let iso = t.path().join("iso");
    let o = run(&["angular", "--preset", "isotropic", "--out", iso.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(iso.join("angular.csv")).unwrap();
    let rows: Vec<(f64, f64, f64)> = rdr.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 90 * 180);
    for (theta, _, v) in &rows {
        let p = v / theta.to_radians().sin();
        assert!((p - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }

    let b = t.path().join("b");
    let o = run(&["angular", "--preset", "fig8b", "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_path(b.join("angular.csv")).unwrap();
    let rows: Vec<(f64, f64, f64)> = rdr.deserialize().map(Result::unwrap).collect();
    let best = rows.iter().copied().fold((0.0, 0.0, f64::NEG_INFINITY), |m, r| if r.2 > m.2 { r } else { m });
    assert!((best.0 - 45.0).abs() <= 2.0, "argmax θ = {}", best.0);
    assert!(best.1 <= 2.0 || best.1 >= 358.0, "argmax φ = {}", best.1);
    assert!(b.join("angular.csv.manifest.json").exists());
}
