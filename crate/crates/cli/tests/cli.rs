use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use kedmd::config::ExperimentConfig;
use kedmd::experiments;
use kedmd::io;
use kedmd_core::control::ControlSystem;
use kedmd_core::geometry::{staggered_grid, AxisBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KELLETT: &str = r#"
system = "kellett"
seed = 3
[grid]
kind = "uniform"
delta = 0.4
[validation]
delta = 0.1
[rollout]
initial = [[1.9, 0.0], [0.3, -1.2]]
steps = 10
"#;

const DUFFING: &str = r#"
system = "duffing"
seed = 11
[grid]
kind = "chebyshev"
points_per_axis = 9
[validation]
delta = 0.1
region = [-1.0, 1.0]
[control]
neighbors = 6
[rollout]
initial = [[0.2, 0.1]]
steps = 15
random_controls = 4
hold = 3
"#;

fn kedmd(config: &Path, out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kedmd"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Every output file except timings, with the recorded output path blanked.
fn snapshot(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.file_name().unwrap().to_string_lossy().contains("timing") {
                let text = fs::read_to_string(&p).unwrap().replace(&dir.display().to_string(), "<out>");
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), text));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let auto = write_config(tmp.path(), "k.toml", KELLETT);
    let ctrl = write_config(tmp.path(), "d.toml", DUFFING);
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        for cmd in ["fit-autonomous", "heatmap", "lyapunov", "rollout"] {
            let o = kedmd(&auto, &out.join("auto"), &[cmd]);
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        for cmd in ["fit-control", "control-heatmap", "rollout"] {
            let o = kedmd(&ctrl, &out.join("ctrl"), &[cmd]);
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        runs.push(snapshot(&out));
    }
    assert!(runs[0].len() > 15);
    assert_eq!(runs[0], runs[1]);
    // Timings are kept out of the deterministic files.
    assert!(tmp.path().join("a/auto/timing.json").exists());

    let other = tmp.path().join("c");
    assert!(kedmd(&ctrl, &other, &["--seed", "12", "fit-control"]).status.success());
    let a = fs::read(tmp.path().join("a/ctrl/micro_data.csv")).unwrap();
    assert_ne!(a, fs::read(other.join("micro_data.csv")).unwrap());
}

#[test]
fn autonomous_bundle_round_trips() {
    let cfg = ExperimentConfig::from_toml(KELLETT).unwrap();
    let run = experiments::run_fit_autonomous(&cfg).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    io::save_autonomous(tmp.path(), "kellett", &run.surrogate).unwrap();
    let (back, meta) = io::load_autonomous(tmp.path()).unwrap();
    assert_eq!(meta.system, "kellett");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let (a, b) = (run.surrogate.predict(&x), back.predict(&x));
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-14, "{x:?}: {p} vs {q}");
        }
    }
}

#[test]
fn control_bundle_round_trips() {
    let cfg = ExperimentConfig::from_toml(DUFFING).unwrap();
    let run = experiments::run_fit_control(&cfg).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    io::save_control(tmp.path(), "duffing", &run.surrogate, &run.regression).unwrap();
    let (back, meta) = io::load_control(tmp.path()).unwrap();
    assert_eq!(meta.control.unwrap().neighbors, 6);
    assert_eq!(back.control_bound(), 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let u = [rng.gen_range(-2.0..2.0)];
        let (a, b) = (run.surrogate.predict(&x, &u), back.predict(&x, &u));
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-14);
        }
    }
}

#[test]
fn too_few_neighbors_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    // m = 1, so N = 1 cannot determine H.
    let cfg = write_config(tmp.path(), "d.toml", &DUFFING.replace("neighbors = 6", "neighbors = 1"));
    let o = kedmd(&cfg, &tmp.path().join("out"), &["fit-control"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!tmp.path().join("out/micro_data.csv").exists());
}

#[test]
fn exit_codes_follow_failure_class() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let missing = tmp.path().join("nope.toml");
    assert_eq!(kedmd(&missing, &out, &["verify"]).status.code(), Some(2));
    let bad = write_config(tmp.path(), "bad.toml", "system = \"kellett\"\nlambda = -1.0\n");
    assert_eq!(kedmd(&bad, &out, &["fit-autonomous"]).status.code(), Some(2));
    let unknown = write_config(tmp.path(), "u.toml", "system = \"kellett\"\nbogus = 1\n");
    assert_eq!(kedmd(&unknown, &out, &["fit-autonomous"]).status.code(), Some(2));

    let good = write_config(tmp.path(), "k.toml", KELLETT);
    let o = kedmd(&good, &out, &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(out.join("verify.json").exists());

    // V = ‖x‖² does not decrease under an expanding map.
    let expanding = r#"
        [system]
        name = "expanding"
        dim = 2
        drift = ["1.5 * x1", "1.5 * x2"]
        domain = { lower = [-1.0, -1.0], upper = [1.0, 1.0] }
        equilibria = [[0.0, 0.0]]
        lyapunov = { v = "x1^2 + x2^2", alpha = "0.1 * r^2" }
        [grid]
        kind = "uniform"
        delta = 0.25
        [validation]
        delta = 0.1
    "#;
    let e = write_config(tmp.path(), "e.toml", expanding);
    let o = kedmd(&e, &out, &["verify"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stdout));

    // Two coincident grid points make K singular.
    fs::write(tmp.path().join("dup.csv"), "x1,x2\n0.0,0.0\n0.5,0.5\n0.5,0.5\n").unwrap();
    let dup = write_config(
        tmp.path(),
        "dup.toml",
        "system = \"kellett\"\n[grid]\nkind = \"file\"\npath = \"dup.csv\"\n",
    );
    assert_eq!(kedmd(&dup, &out, &["fit-autonomous"]).status.code(), Some(3));

    // Control commands reject an autonomous system.
    assert_eq!(kedmd(&good, &out, &["fit-control"]).status.code(), Some(2));
}

#[test]
fn outputs_have_documented_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "k.toml", KELLETT);
    let out = tmp.path().join("out");
    for cmd in ["fit-autonomous", "heatmap", "lyapunov"] {
        assert!(kedmd(&cfg, &out, &[cmd]).status.success());
    }
    let parsed = ExperimentConfig::from_toml(KELLETT).unwrap();
    let grid = staggered_grid(&AxisBox::cube(2, -2.0, 2.0).unwrap(), parsed.validation.delta).unwrap();
    let (header, rows) = io::read_table(&out.join("error_heatmap.csv")).unwrap();
    assert_eq!(header, ["x1", "x2", "error"]);
    assert_eq!(rows.len(), grid.len());
    let svg = fs::read_to_string(out.join("error_heatmap.svg")).unwrap();
    assert!(svg.contains("color scale: log10"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("lyapunov_summary.json")).unwrap()).unwrap();
    assert!(summary["min_margin"].is_number());
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["seed"], 3);
}
