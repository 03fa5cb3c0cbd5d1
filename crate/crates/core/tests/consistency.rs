//! Cross-module agreement checks with closed-form or independent oracles.

use std::path::PathBuf;

use gsm2_core::config::RunConfig;
use gsm2_core::diffusion::MotionModel;
use gsm2_core::engine::{InitialCondition, Model};
use gsm2_core::meanfield::limit::HomogeneousLimit;
use gsm2_core::meanfield::master::{InitialLaw, MasterSolver};
use gsm2_core::meanfield::nonspatial::simulate_nonspatial;
use gsm2_core::meanfield::ScalarRates;
use gsm2_core::rates::RateModel;
use gsm2_core::run::{run, spatial_ensemble};
use gsm2_core::Domain;

fn configs() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    files
}

#[test]
fn linear_spatial_mean_decays_exponentially() {
    let (r, a) = (1.5, 0.5);
    let times = [0.2, 0.5, 1.0];
    let model = Model::new(Domain::unit_square(), RateModel::constant(r, a, 0.0, 1.0), MotionModel::isotropic(0.1, 0.1, 0.01));
    let stats = spatial_ensemble(&model, &InitialCondition::lesions(10, 0), 11, 4000, &times).unwrap();
    for (i, t) in times.iter().enumerate() {
        let p = (-(r + a) * t).exp();
        let exact_x = 10.0 * p;
        let exact_y = 10.0 * a / (r + a) * (1.0 - p);
        let se_x = (10.0 * p * (1.0 - p) / 4000.0).sqrt();
        assert!((stats.mean_x[i] - exact_x).abs() < 4.0 * se_x, "t={t}: {} vs {exact_x}", stats.mean_x[i]);
        assert!((stats.mean_y[i] - exact_y).abs() < 0.05 * exact_y.max(1.0));
    }
}

#[test]
fn gillespie_mean_matches_master_with_pairs() {
    let rates = ScalarRates::new(1.0, 0.2, 0.3);
    let times = [0.25, 1.0];
    let law = InitialLaw::Fixed { x0: 8, y0: 0 };
    let master = MasterSolver::new(rates, 1e-3).solve(&law, &times).unwrap();
    let mc = simulate_nonspatial(&law, &rates, &times, 20_000, 5, false).unwrap();
    for i in 0..times.len() {
        assert!((mc.mean_x[i] - master.mean_x[i]).abs() < 0.05, "{} vs {}", mc.mean_x[i], master.mean_x[i]);
        let se = (master.survival[i] * (1.0 - master.survival[i]) / 20_000.0).sqrt();
        assert!((mc.survival[i] - master.survival[i]).abs() < 4.0 * se);
    }
}

#[test]
fn homogeneous_limit_without_pairs_is_exponential() {
    let lim = HomogeneousLimit::new(ScalarRates::new(0.7, 0.3, 0.0));
    let sol = lim.solve(2.0, 0.0, &[0.5, 1.0, 3.0], 1e-3).unwrap();
    for (t, ux, uy) in sol {
        let e = (-t as f64).exp();
        assert!((ux - 2.0 * e).abs() < 1e-9);
        assert!((uy - 2.0 * 0.3 * (1.0 - e)).abs() < 1e-9);
    }
}

#[test]
fn shipped_configs_round_trip_through_toml() {
    let files = configs();
    assert!(!files.is_empty());
    for path in files {
        let cfg = RunConfig::load(&path).unwrap();
        let text = cfg.to_toml_string().unwrap();
        let again = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(again.to_toml_string().unwrap(), text, "{}", path.display());
        cfg.validate().unwrap();
    }
}

#[test]
fn mkm_config_runs_to_completion() {
    let path = configs().into_iter().find(|p| p.ends_with("mkm.toml")).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run(&cfg, dir.path()).unwrap();
    assert!(dir.path().join("mean_trajectory.csv").exists());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert!(!report.files.is_empty());
}
