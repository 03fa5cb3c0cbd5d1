use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn gsm2() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gsm2"));
    c.env_remove("GSM2_THREADS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const SMALL: &str = r#"
schema_version = 1
mode = "spatial_mc"
t_end = 2.0
output_times = [0.5, 1.0, 2.0]
replicates = 2
seed = 3

[domain]
shape = "box"
lo = [0.0, 0.0]
hi = [1.0, 1.0]

[rates]
repair = { base = 1.0 }
death = { base = 0.2 }
pair = { kernel = { kind = "gaussian", weight = 1.0, epsilon = 0.2 } }
lethal_prob = { kind = "constant", p = 0.5 }

[motion]
dt_diff = 0.01
x = { sigma = 0.1 }

[initial]
kind = "lesions"
x0 = 6

[output]
events = true
snapshots = true
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_accepts_shipped_configs() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let status = gsm2().args(["validate", "--config"]).arg(&path).status().unwrap();
        assert!(status.success(), "{}", path.display());
    }
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("seed = 3", "sead = 3"));
    let out = gsm2().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sead"));
    let missing = gsm2().args(["run", "--config", "/nonexistent/x.toml"]).status().unwrap();
    assert_eq!(missing.code(), Some(2));
}

#[test]
fn numerical_errors_exit_with_3_and_flag_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("seed = 3", "seed = 3\nn_max = 1");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let status = gsm2().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(3));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"status\": \"failed\""));
}

#[test]
fn spatial_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let status = gsm2()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(out);
    }
    for name in ["trajectory.csv", "events.csv", "snapshots.csv", "survival.csv", "summary.json", "manifest.json"] {
        let a = fs::read(outputs[0].join(name)).unwrap();
        let b = fs::read(outputs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let traj = fs::read_to_string(outputs[0].join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("replicate_id,t,n_x,n_y"));
    assert_eq!(traj.lines().count(), 1 + 2 * 3);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        assert!(gsm2().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).args(["--seed", seed]).status().unwrap().success());
        fs::read(out.join("events.csv")).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
}

#[test]
fn mkm_mode_writes_no_survival() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mkm");
    let status = gsm2().args(["run", "--config"]).arg(configs().join("mkm.toml")).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    assert!(!out.join("survival.csv").exists());
    let text = fs::read_to_string(out.join("mean_trajectory.csv")).unwrap();
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - v[3]).abs() < 1e-9, "{line}");
    }
}

#[test]
fn rescaling_is_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("seed = 3", "seed = 3\nscale = 10.0").replace("x0 = 6", "x0 = 2");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert!(gsm2().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let rates = &manifest["rates"];
    let raw_b = rates["raw"]["b"].as_f64().unwrap();
    assert!((raw_b - 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * 0.2)).abs() < 1e-12);
    assert!((rates["effective"]["b"].as_f64().unwrap() - raw_b / 10.0).abs() < 1e-12);
    assert_eq!(rates["effective"]["initial_multiplier"].as_f64(), Some(10.0));
    assert_eq!(manifest["scale"].as_f64(), Some(10.0));
    // initial X counts are multiplied by K
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let first: Vec<&str> = traj.lines().nth(1).unwrap().split(',').collect();
    assert!(first[2].parse::<usize>().unwrap() <= 20);
}

#[test]
fn sweeps_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dt");
    let status = gsm2()
        .args(["sweep", "--param", "dt-diff", "--values", "0.02,0.01", "--replicates", "20", "--config"])
        .arg(configs().join("equivalence.toml"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(fs::read_to_string(out.join("dt_sweep.csv")).unwrap().lines().count(), 3);
    let out = dir.path().join("k");
    let status = gsm2()
        .args(["sweep", "--param", "k", "--values", "1,4", "--replicates", "20", "--config"])
        .arg(configs().join("equivalence.toml"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out.join("k_sweep.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("k,e_k,se,mean_error,mean_error_se,replicates"));
}
