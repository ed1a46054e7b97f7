use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_plumetrace");

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn write(&self, rel: &str, text: &str) -> PathBuf {
        let p = self.path(rel);
        fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .args(args)
            .current_dir(self.dir.path())
            .env("PLUMETRACE_CACHE_DIR", self.path("cache"))
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }

    fn json(&self, rel: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(rel)).unwrap()).unwrap()
    }

    /// Simulated data plus a small strict grid around the true source.
    fn fixture(&self, noiseless: bool, extra: &str) -> PathBuf {
        let mut args = vec!["simulate", "--seed", "11", "--out", "sim"];
        if noiseless {
            args.push("--noiseless");
        }
        self.ok(&args);
        self.write(
            "grid.json",
            r#"{"x": [-0.5, 0.5, 0.25], "y": [-1, 0, 0.5], "angles": [10, 20, 30]}"#,
        );
        self.write(
            "run.json",
            &format!(
                r#"{{"series": "sim/series.csv", "layout": "sim/layout.json", "grid": "grid.json",
                    "direction": "sim/direction.json", "reps": 200, "seed": 5, "out": "res"{extra}}}"#
            ),
        )
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn simulate_emits_paper_shape() {
    let ws = Workspace::new();
    ws.ok(&["simulate", "--out", "sim"]);
    let rows = read_rows(&ws.path("sim/series.csv"));
    assert_eq!(rows.len(), 241);
    assert_eq!(rows[0], ["t", "c1", "c2", "c3", "c4", "c5", "c6"]);
    assert!(rows[1..].iter().all(|r| r.len() == 7));
    assert_eq!(rows[240][0], "240");
    let truth = ws.json("sim/truth.json");
    assert_eq!(truth["params"]["alpha"], 20.0);
    assert_eq!(truth["delta"].as_array().unwrap().len(), 6);
    assert_eq!(ws.json("sim/layout.json")["n"], 240);
}

#[test]
fn simulate_is_byte_identical_under_seed() {
    let ws = Workspace::new();
    ws.ok(&["simulate", "--seed", "3", "--out", "a"]);
    ws.ok(&["simulate", "--seed", "3", "--out", "b"]);
    ws.ok(&["simulate", "--seed", "4", "--out", "c"]);
    let read = |p: &str| fs::read(ws.path(p)).unwrap();
    assert_eq!(read("a/series.csv"), read("b/series.csv"));
    assert_eq!(read("a/truth.json"), read("b/truth.json"));
    assert_ne!(read("a/series.csv"), read("c/series.csv"));
}

#[test]
fn noiseless_simulation_is_the_pure_signal() {
    let ws = Workspace::new();
    ws.ok(&["simulate", "--noiseless", "--out", "sim"]);
    let truth = ws.json("sim/truth.json");
    let f: Vec<f64> = serde_json::from_value(truth["change_map"]["f"].clone()).unwrap();
    let g: Vec<f64> = serde_json::from_value(truth["change_map"]["g"].clone()).unwrap();
    let delta: Vec<f64> = serde_json::from_value(truth["delta"].clone()).unwrap();
    let rows = read_rows(&ws.path("sim/series.csv"));
    let n = 240.0;
    for row in &rows[1..] {
        let t: f64 = row[0].parse().unwrap();
        for i in 0..6 {
            let v: f64 = row[i + 1].parse().unwrap();
            let inside = f[i] * n < t && t <= g[i] * n;
            let lo = (f[i] * n).floor();
            let hi = (g[i] * n).floor();
            assert_eq!(inside, lo < t && t <= hi);
            assert_eq!(v, if inside { delta[i] } else { 0.0 }, "t={t} i={i}");
        }
    }
}

#[test]
fn noiseless_estimate_recovers_the_source() {
    let ws = Workspace::new();
    ws.write(
        "cov.json",
        r#"{"kind": "diagonal", "values": [1, 1, 1, 1, 1, 1], "provenance": "known"}"#,
    );
    let cfg = ws.fixture(true, r#", "cov": {"file": "cov.json"}"#);
    ws.ok(&["estimate", "--config", cfg.to_str().unwrap()]);
    let report = ws.json("res/report.json");
    let grid_size = report["grid_size"].as_u64().unwrap() as usize;
    for (stat, tag) in [("multivariate", "mult"), ("projection", "proj")] {
        let theta = &report[stat]["theta_hat"];
        assert_eq!(
            (
                theta["x_s"].as_f64(),
                theta["y_s"].as_f64(),
                theta["alpha"].as_f64()
            ),
            (Some(0.0), Some(0.0), Some(20.0)),
            "{stat}"
        );
        let rows = read_rows(&ws.path(&format!("res/surface_{tag}.csv")));
        assert_eq!(rows[0], ["x", "y", "alpha", "value"]);
        assert_eq!(rows.len() - 1, grid_size);
        let svg = fs::read_to_string(ws.path(&format!("res/heatmap_{tag}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<circle"));
        assert!(ws.path(&format!("res/heatmap_{tag}.csv")).exists());
    }
    assert_eq!(report["projection"]["sigma_hat"], 1.0);
    assert_eq!(report["cov_provenance"], "known");
}

#[test]
fn stat_selection_limits_outputs() {
    let ws = Workspace::new();
    let cfg = ws.fixture(false, "");
    ws.ok(&[
        "estimate",
        "--config",
        cfg.to_str().unwrap(),
        "--stat",
        "mult",
    ]);
    let report = ws.json("res/report.json");
    assert!(report.get("projection").is_none());
    assert!(ws.path("res/surface_mult.csv").exists());
    assert!(!ws.path("res/surface_proj.csv").exists());
    assert_eq!(report["sigma_diagonal"].as_array().unwrap().len(), 6);
}

#[test]
fn test_report_is_deterministic_across_runs_and_threads() {
    let ws = Workspace::new();
    let cfg = ws.fixture(false, "");
    let cfg = cfg.to_str().unwrap();
    ws.ok(&["test", "--config", cfg, "--threads", "1"]);
    let first = fs::read(ws.path("res/test_report.json")).unwrap();
    ws.ok(&["test", "--config", cfg, "--threads", "4"]);
    assert_eq!(first, fs::read(ws.path("res/test_report.json")).unwrap());
    fs::remove_dir_all(ws.path("cache")).unwrap();
    ws.ok(&["test", "--config", cfg, "--threads", "3"]);
    assert_eq!(first, fs::read(ws.path("res/test_report.json")).unwrap());

    let report = ws.json("res/test_report.json");
    let tests = report["tests"].as_array().unwrap();
    assert_eq!(tests.len(), 2);
    for t in tests {
        let p = t["p_value"].as_f64().unwrap();
        assert!(p > 0.0 && p <= 1.0);
        assert_eq!(t["reject"].as_bool().unwrap(), p <= 0.05);
        assert_eq!(t["fingerprint"].as_str().unwrap().len(), 64);
        assert_eq!(t["caveat"], false);
    }
}

#[test]
fn cache_mismatch_needs_regen() {
    let ws = Workspace::new();
    let cfg = ws.fixture(false, "");
    let cfg = cfg.to_str().unwrap();
    ws.ok(&["test", "--config", cfg, "--stat", "mult"]);
    let out = ws.run(&["test", "--config", cfg, "--stat", "mult", "--seed", "6"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--regen"));
    ws.ok(&[
        "test", "--config", cfg, "--stat", "mult", "--seed", "6", "--regen",
    ]);
    assert_eq!(ws.json("res/test_report.json")["tests"][0]["seed"], 6);
    ws.ok(&["test", "--config", cfg, "--stat", "mult", "--seed", "6"]);
}

#[test]
fn user_covariance_sets_the_caveat() {
    let ws = Workspace::new();
    ws.write(
        "cov.json",
        r#"{"kind": "diagonal", "values": [1, 1, 1, 1, 1, 1], "provenance": "user"}"#,
    );
    let cfg = ws.fixture(false, r#", "cov": {"file": "cov.json"}"#);
    ws.ok(&["test", "--config", cfg.to_str().unwrap()]);
    let report = ws.json("res/test_report.json");
    for t in report["tests"].as_array().unwrap() {
        assert_eq!(t["caveat"], true);
    }
}

fn cache_files(ws: &Workspace) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(ws.path("cache"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
}

fn quantile(table: &Value, level: f64) -> f64 {
    let values = table["values"].as_array().unwrap();
    let k = (level * values.len() as f64).ceil() as usize;
    values[k - 1].as_f64().unwrap()
}

#[test]
fn critvals_is_idempotent_and_replaces_on_reps_change() {
    let ws = Workspace::new();
    let cfg = ws.fixture(false, "");
    let cfg = cfg.to_str().unwrap();
    ws.ok(&["critvals", "--config", cfg]);
    let files = cache_files(&ws);
    assert_eq!(files.len(), 2);
    let before: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
    ws.ok(&["critvals", "--config", cfg]);
    let after: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
    assert_eq!(before, after);

    let small: Vec<Value> = before
        .iter()
        .map(|b| serde_json::from_slice(b).unwrap())
        .collect();
    ws.ok(&["critvals", "--config", cfg, "--reps", "2000"]);
    assert_eq!(cache_files(&ws), files);
    for (file, old) in files.iter().zip(&small) {
        let new: Value = serde_json::from_slice(&fs::read(file).unwrap()).unwrap();
        assert_eq!(new["reps"], 2000);
        assert_eq!(new["values"].as_array().unwrap().len(), 2000);
        let (q90, q95) = (quantile(&new, 0.90), quantile(&new, 0.95));
        assert!(q95 >= q90);
        let rel = (quantile(old, 0.90) - q90).abs() / q90;
        assert!(rel < 0.15, "{}: relative change {rel}", file.display());
    }
}

#[test]
fn critvals_without_series_needs_a_covariance_for_projection() {
    let ws = Workspace::new();
    ws.fixture(false, "");
    let cfg = ws.write(
        "nodata.json",
        r#"{"layout": "sim/layout.json", "grid": "grid.json", "direction": "sim/direction.json",
            "reps": 100}"#,
    );
    let cfg = cfg.to_str().unwrap();
    ws.ok(&["critvals", "--config", cfg, "--stat", "mult"]);
    assert_eq!(code(&ws.run(&["critvals", "--config", cfg])), 2);
}

#[test]
fn exit_codes() {
    let ws = Workspace::new();
    let cfg = ws.fixture(false, "");
    let cfg = cfg.to_str().unwrap();

    assert_eq!(code(&ws.run(&["estimate"])), 2);
    assert_eq!(code(&ws.run(&["frobnicate"])), 2);
    assert_eq!(
        code(&ws.run(&["estimate", "--config", cfg, "--alpha-level", "1.5"])),
        2
    );
    assert_eq!(code(&ws.run(&["test", "--config", cfg, "--reps", "10"])), 2);
    assert_eq!(
        code(&ws.run(&["estimate", "--config", cfg, "--threads", "0"])),
        2
    );

    assert_eq!(code(&ws.run(&["estimate", "--config", "missing.json"])), 3);
    let bad = ws.write("bad.json", r#"{"series": "sim/series.csv"}"#);
    assert_eq!(
        code(&ws.run(&["estimate", "--config", bad.to_str().unwrap()])),
        3
    );
    ws.write("broken.csv", "t,c1\n1,x\n");
    let broken = ws.write(
        "broken.json",
        r#"{"series": "broken.csv", "layout": "sim/layout.json", "grid": "grid.json", "stat": "mult"}"#,
    );
    assert_eq!(
        code(&ws.run(&["estimate", "--config", broken.to_str().unwrap()])),
        3
    );

    let mut text = String::from("t,c1,c2,c3,c4,c5,c6\n");
    for t in 1..=240 {
        text.push_str(&format!("{t},1,1,1,1,1,1\n"));
    }
    ws.write("flat.csv", &text);
    let flat = ws.write(
        "flat.json",
        r#"{"series": "flat.csv", "layout": "sim/layout.json", "grid": "grid.json", "stat": "mult"}"#,
    );
    let out = ws.run(&["estimate", "--config", flat.to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));

    ws.write(
        "singular.json",
        r#"{"kind": "full", "values": [[1,1,0,0,0,0],[1,1,0,0,0,0],[0,0,1,0,0,0],[0,0,0,1,0,0],[0,0,0,0,1,0],[0,0,0,0,0,1]], "provenance": "user"}"#,
    );
    let sing = ws.write(
        "sing.json",
        r#"{"series": "sim/series.csv", "layout": "sim/layout.json", "grid": "grid.json",
            "stat": "mult", "cov": {"file": "singular.json"}}"#,
    );
    assert_eq!(
        code(&ws.run(&["estimate", "--config", sing.to_str().unwrap()])),
        4
    );
}
