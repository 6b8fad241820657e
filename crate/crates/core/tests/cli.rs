use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mildflow::io::read_state;
use tempfile::TempDir;

const BASE: &str = r#"{
  "grid": {"n": 3, "N": 8, "L": 6.283185307179586},
  "forcing": {"period": 1.0, "terms": []},
  "initial": {
    "velocity": {"preset": "taylor-green", "params": {"amplitude": 0.5}},
    "temperature": {"preset": "gaussian-bump", "params": {"amplitude": 0.2, "sigma": 0.6}}
  },
  "solve": {"dt": 0.0625},
  "sampler": {"centers": 8, "radii": 4},
  "estimates": {"ensemble": 1}
}"#;

const FORCED: &str = r#"{
  "grid": {"n": 3, "N": 8, "L": 6.283185307179586},
  "forcing": {"period": 1.0, "kappa": 1.0, "terms": [
    {"target": "tensor", "harmonic": 1, "amplitude": 0.001,
     "shape": {"preset": "taylor-green", "params": {"amplitude": 1.0}}},
    {"target": "vector", "harmonic": 2, "phase": "sin", "amplitude": 0.001,
     "shape": {"preset": "random-div-free", "params": {"amplitude": 1.0, "slope": 2.0, "kmax": 2}}},
    {"target": "gravity", "amplitude": 0.01,
     "shape": {"preset": "shear-mode", "params": {"amplitude": 1.0, "k": 1}}}
  ]},
  "solve": {"dt": 0.0625},
  "sampler": {"centers": 8, "radii": 4},
  "stability": {"q": 6.0, "r": 6.0, "b": 3.0, "t_points": 24},
  "estimates": {"ensemble": 1},
  "seed": 3
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn mildflow(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mildflow"));
    c.args(args);
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn run_ok(cmd: &str, config: &Path, out: &Path) {
    let o = mildflow(
        &[cmd, "--config", config.to_str().unwrap(), "--output", out.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
}

fn csv_column(path: &Path, col: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == col).unwrap();
    lines
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').nth(j).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn unforced_evolve_loses_energy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", BASE);
    let out = tmp.path().join("evolve");
    run_ok("evolve", &cfg, &out);
    let e = csv_column(&out.join("trajectory.csv"), "energy");
    assert_eq!(e.len(), 17);
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", FORCED);
    for cmd in ["evolve", "periodic-linear", "periodic-nonlinear"] {
        let (a, b) = (tmp.path().join(format!("{cmd}-a")), tmp.path().join(format!("{cmd}-b")));
        run_ok(cmd, &cfg, &a);
        run_ok(cmd, &cfg, &b);
        for entry in fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if name == "manifest.json" {
                continue;
            }
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{cmd}/{name:?}");
        }
    }
}

#[test]
fn every_csv_has_header_and_manifest_and_fields_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", FORCED);
    for cmd in ["norms", "evolve", "periodic-linear", "periodic-nonlinear", "stability", "verify-estimates"] {
        let out = tmp.path().join(cmd);
        run_ok(cmd, &cfg, &out);
        let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        let hash = manifest["config_sha256"].as_str().unwrap();
        assert_eq!(manifest["command"], cmd);
        for f in manifest["files"].as_array().unwrap() {
            let name = f.as_str().unwrap();
            let path = out.join(name);
            if name.ends_with(".csv") {
                let text = fs::read_to_string(&path).unwrap();
                assert!(!text.contains('\r'));
                let lines: Vec<&str> = text.lines().collect();
                assert!(lines.len() >= 2 && !lines[0].starts_with('#'), "{cmd}/{name}");
                assert_eq!(*lines.last().unwrap(), format!("# manifest: manifest.json config_sha256={hash}"));
            } else if name.ends_with(".bqf") {
                let x = read_state(&path).unwrap();
                let copy = tmp.path().join("copy.bqf");
                mildflow::io::write_state(&copy, &x).unwrap();
                assert_eq!(fs::read(&path).unwrap(), fs::read(&copy).unwrap());
            }
        }
    }
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let tmp = TempDir::new().unwrap();
    let bad_p = write_config(tmp.path(), "p.json", &FORCED.replacen("\"seed\": 3", "\"seed\": 3, \"p\": 2.0", 1));
    let o = mildflow(&["periodic-nonlinear", "--config", bad_p.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2<p≤n"));

    let bad_json = write_config(tmp.path(), "j.json", "{\"grid\": 1}");
    let o = mildflow(&["evolve", "--config", bad_json.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));

    let o = mildflow(&["evolve", "--config", tmp.path().join("missing.json").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(5));

    let strong = FORCED.replacen(
        r#""shape": {"preset": "taylor-green", "params": {"amplitude": 1.0}}}"#,
        r#""shape": {"preset": "random-div-free", "params": {"amplitude": 1.0, "slope": 2.0, "kmax": 2}},
           "partner": {"preset": "shear-mode", "params": {"amplitude": 1.0, "k": 1}}}"#,
        1,
    );
    let strong = write_config(tmp.path(), "s.json", &strong.replace("\"amplitude\": 0.001", "\"amplitude\": 400.0"));
    let o = mildflow(
        &["periodic-nonlinear", "--config", strong.to_str().unwrap(), "--output", tmp.path().join("s").to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn environment_mirrors_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", BASE);
    let out = tmp.path().join("env");
    let o = mildflow(
        &["norms"],
        &[
            ("BQ_CONFIG", cfg.to_str().unwrap()),
            ("BQ_OUTPUT", out.to_str().unwrap()),
            ("BQ_SEED", "11"),
            ("BQ_THREADS", "1"),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["threads"], 1);
}

#[test]
fn schema_subcommand_prints_json() {
    let o = mildflow(&["schema"], &[]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["properties"]["grid"].is_object());
}
