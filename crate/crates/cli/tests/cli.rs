use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergoplan"))
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn plan(config: &Path, out: &Path) -> Output {
    run(&["plan", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn summary_ergodicity(dir: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    v["ergodicity"].as_f64().unwrap()
}

#[test]
fn plan_writes_every_artifact_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(plan(&preset("smoke.json"), &a).status.success());
    assert!(plan(&preset("smoke.json"), &b).status.success());
    for f in ["trajectory.csv", "iterations.csv", "time_average.pgm", "map.pgm", "summary.json"] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    for f in ["trajectory.csv", "iterations.csv", "time_average.pgm", "map.pgm"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert!(fs::read_to_string(a.join("map.pgm")).unwrap().starts_with("P2\n"));
}

#[test]
fn eval_reproduces_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert!(plan(&preset("smoke.json"), &out).status.success());
    let o = run(&[
        "eval",
        "--config",
        preset("smoke.json").to_str().unwrap(),
        "--trajectory",
        out.join("trajectory.csv").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["ergodicity"].as_f64().unwrap(), summary_ergodicity(&out));
}

#[test]
fn invalid_config_exits_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    let text = fs::read_to_string(preset("smoke.json")).unwrap().replace("\"dt\": 0.1", "\"dt\": -0.1");
    fs::write(&cfg, text).unwrap();
    let o = plan(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());

    fs::write(&cfg, "{ \"workspace\": [1, 1], \"surprise\": 1 }").unwrap();
    assert_eq!(plan(&cfg, &tmp.path().join("out")).status.code(), Some(2));
}

#[test]
fn truncated_trajectory_exits_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert!(plan(&preset("smoke.json"), &out).status.success());
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    let cut = tmp.path().join("cut.csv");
    fs::write(&cut, lines[..lines.len() - 1].join("\n")).unwrap();
    let o = run(&["eval", "--config", preset("smoke.json").to_str().unwrap(), "--trajectory", cut.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stationary_trajectory_matches_closed_form() {
    // Uniform map, point robot parked at q: the error is sum over k != 0 of
    // Lambda_k F_k(q)^2.
    let tmp = tempfile::tempdir().unwrap();
    let q = [0.3, 0.7];
    let mut csv = String::from("t,robot_id,x1,x2,u1,u2\n");
    for t in 0..=20 {
        let time = t as f64 * 0.1;
        if t < 20 {
            csv.push_str(&format!("{time},0,{},{},0,0\n", q[0], q[1]));
        } else {
            csv.push_str(&format!("{time},0,{},{},,\n", q[0], q[1]));
        }
    }
    let path = tmp.path().join("still.csv");
    fs::write(&path, csv).unwrap();
    let o = run(&["eval", "--config", preset("smoke.json").to_str().unwrap(), "--trajectory", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();

    let mut expect = 0.0;
    for k1 in 0..5 {
        for k2 in 0..5 {
            if k1 + k2 == 0 {
                continue;
            }
            let norm = |k: usize| if k == 0 { 1.0 } else { 0.5f64.sqrt() };
            let f = (k1 as f64 * std::f64::consts::PI * q[0]).cos() * (k2 as f64 * std::f64::consts::PI * q[1]).cos()
                / (norm(k1) * norm(k2));
            let lambda = (1.0 + (k1 * k1 + k2 * k2) as f64).powf(-1.5);
            expect += lambda * f * f;
        }
    }
    assert!((v["ergodicity"].as_f64().unwrap() - expect).abs() < 1e-12);
}

#[test]
fn k_h_sweep_writes_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("drone.json");
    let text = fs::read_to_string(preset("drone.json"))
        .unwrap()
        .replace("\"horizon\": 10.0", "\"horizon\": 0.5");
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["solver"] = serde_json::json!({ "max_outer": 2, "max_inner": 20 });
    v["dynamics"]["horizon"] = serde_json::json!(0.5);
    fs::write(&cfg, serde_json::to_string(&v).unwrap()).unwrap();
    let out = tmp.path().join("sweep");
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--var",
        "k_h",
        "--values",
        "0.05,0.1,0.15,0.2,0.25",
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "value,final_ergodicity");
    assert_eq!(rows.len(), 6);
    for (row, value) in rows[1..].iter().zip(["0.05", "0.1", "0.15", "0.2", "0.25"]) {
        let (v, e) = row.split_once(',').unwrap();
        assert_eq!(v, value);
        assert_eq!(e.parse::<f64>().unwrap(), summary_ergodicity(&out.join(format!("k_h_{value}"))));
    }

    let modes = tmp.path().join("modes");
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        modes.to_str().unwrap(),
        "--var",
        "mode",
        "--values",
        "dynamic,fixed:0.05,point",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(modes.join("comparison.csv")).unwrap().lines().count(), 4);

    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--var", "mode", "--values", "wobbly"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn version_prints() {
    let o = run(&["version"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ergoplan "));
}
