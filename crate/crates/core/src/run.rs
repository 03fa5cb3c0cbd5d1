//! Run orchestration: executes a configuration, writes artifacts and the
//! manifest, and provides the ensemble drivers used by sweeps.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Mode, RunConfig};
use crate::engine::{simulate_replicate, InitialCondition, Model, Observe, Simulation, Trajectory};
use crate::error::{Error, Result};
use crate::meanfield::limit::{HomogeneousLimit, SpatialLimit};
use crate::meanfield::master::MasterSolver;
use crate::meanfield::mkm::{reduced_closed_form, solve_mkm, MkmParams};
use crate::meanfield::nonspatial::simulate_nonspatial;
use crate::output::{self, fmt_f, CsvWriter};
use crate::rng::RNG_ALGORITHM;
use crate::stats::{linear_fit, mean_var};

/// Replicates simulated together before their output is written.
const CHUNK: usize = 256;

/// Fraction of lethal-free replicates per checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub se: Vec<f64>,
    pub n: usize,
}

impl SurvivalEstimate {
    /// `survivors[i]` replicates out of `n` have `N^Y = 0` at `times[i]`.
    pub fn from_counts(times: &[f64], survivors: &[usize], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("survival needs at least one replicate".into()));
        }
        if survivors.len() != times.len() || survivors.iter().any(|s| *s > n) {
            return Err(Error::Input("survivor counts do not match the checkpoints".into()));
        }
        let s: Vec<f64> = survivors.iter().map(|k| *k as f64 / n as f64).collect();
        let se = s.iter().map(|p| (p * (1.0 - p) / n as f64).sqrt()).collect();
        Ok(Self { times: times.to_vec(), s, se, n })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = CsvWriter::create(path, output::SURVIVAL_HEADER)?;
        for i in 0..self.times.len() {
            w.line(&format!("{},{},{},{}", fmt_f(self.times[i]), fmt_f(self.s[i]), fmt_f(self.se[i]), self.n))?;
        }
        w.finish()
    }
}

/// Survival from simulated trajectories sharing the same checkpoints.
pub fn estimate_survival(trajectories: &[Trajectory]) -> Result<SurvivalEstimate> {
    let first = trajectories.first().ok_or_else(|| Error::Input("survival needs at least one replicate".into()))?;
    let times: Vec<f64> = first.counts.iter().map(|c| c.0).collect();
    let mut survivors = vec![0; times.len()];
    for tr in trajectories {
        if tr.counts.len() != times.len() {
            return Err(Error::Input("trajectories have different checkpoints".into()));
        }
        for (k, c) in tr.counts.iter().enumerate() {
            survivors[k] += usize::from(c.2 == 0);
        }
    }
    SurvivalEstimate::from_counts(&times, &survivors, trajectories.len())
}

/// Per-checkpoint ensemble moments of the counts.
#[derive(Clone, Debug, Serialize)]
pub struct CountStats {
    pub times: Vec<f64>,
    pub n: usize,
    pub mean_x: Vec<f64>,
    pub var_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    pub var_y: Vec<f64>,
    pub survival: SurvivalEstimate,
}

#[derive(Default)]
struct Accumulator {
    sx: Vec<f64>,
    sxx: Vec<f64>,
    sy: Vec<f64>,
    syy: Vec<f64>,
    survivors: Vec<usize>,
    n: usize,
}

impl Accumulator {
    fn new(k: usize) -> Self {
        Self { sx: vec![0.0; k], sxx: vec![0.0; k], sy: vec![0.0; k], syy: vec![0.0; k], survivors: vec![0; k], n: 0 }
    }

    fn add(&mut self, counts: impl Iterator<Item = (usize, usize)>) {
        for (k, (x, y)) in counts.enumerate() {
            let (x, y) = (x as f64, y as f64);
            self.sx[k] += x;
            self.sxx[k] += x * x;
            self.sy[k] += y;
            self.syy[k] += y * y;
            self.survivors[k] += usize::from(y == 0.0);
        }
        self.n += 1;
    }

    fn finish(self, times: &[f64]) -> Result<CountStats> {
        let n = self.n as f64;
        let var = |s: &[f64], ss: &[f64]| -> Vec<f64> {
            s.iter().zip(ss).map(|(a, b)| if self.n > 1 { (b - a * a / n) / (n - 1.0) } else { 0.0 }).collect()
        };
        Ok(CountStats {
            times: times.to_vec(),
            n: self.n,
            mean_x: self.sx.iter().map(|v| v / n).collect(),
            var_x: var(&self.sx, &self.sxx),
            mean_y: self.sy.iter().map(|v| v / n).collect(),
            var_y: var(&self.sy, &self.syy),
            survival: SurvivalEstimate::from_counts(times, &self.survivors, self.n)?,
        })
    }
}

/// Simulates `replicates` replicates in parallel chunks and hands each
/// finished trajectory to `consume` in replicate order.
pub fn for_each_replicate(
    model: &Model,
    initial: &InitialCondition,
    master_seed: u64,
    replicates: usize,
    observe: &Observe,
    mut consume: impl FnMut(Trajectory) -> Result<()>,
) -> Result<()> {
    let mut start = 0;
    while start < replicates {
        let end = (start + CHUNK).min(replicates);
        let chunk: Vec<Result<Trajectory>> = (start as u64..end as u64)
            .into_par_iter()
            .map(|rep| simulate_replicate(model, initial, master_seed, rep, observe))
            .collect();
        for tr in chunk {
            consume(tr?)?;
        }
        start = end;
    }
    Ok(())
}

/// Count statistics of a spatial ensemble at `times`.
pub fn spatial_ensemble(
    model: &Model,
    initial: &InitialCondition,
    master_seed: u64,
    replicates: usize,
    times: &[f64],
) -> Result<CountStats> {
    let observe = Observe { times: times.to_vec(), events: false, snapshots: false };
    let mut acc = Accumulator::new(times.len());
    for_each_replicate(model, initial, master_seed, replicates, &observe, |tr| {
        acc.add(tr.counts.iter().map(|c| (c.1, c.2)));
        Ok(())
    })?;
    acc.finish(times)
}

/// First time `N^X` reaches zero, or `None` if it is still positive at `t_end`.
pub fn extinction_time(model: &Model, initial: &InitialCondition, master_seed: u64, replicate: u64, t_end: f64) -> Result<Option<f64>> {
    let mut sim = Simulation::from_initial(model, initial, master_seed, replicate)?;
    if sim.state().xs().is_empty() {
        return Ok(Some(0.0));
    }
    while let Some(ev) = sim.next_event(t_end)? {
        if sim.state().xs().is_empty() {
            return Ok(Some(ev.time));
        }
    }
    Ok(None)
}

/// Mean extinction time of X over replicates, for one `dt_diff`.
#[derive(Clone, Debug, Serialize)]
pub struct ExtinctionSummary {
    pub dt_diff: f64,
    pub times: Vec<Option<f64>>,
    pub mean: f64,
    pub se: f64,
    pub censored: usize,
}

pub fn extinction_ensemble(model: &Model, initial: &InitialCondition, master_seed: u64, replicates: usize, t_end: f64) -> Result<ExtinctionSummary> {
    let times = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| extinction_time(model, initial, master_seed, rep, t_end))
        .collect::<Result<Vec<_>>>()?;
    let observed: Vec<f64> = times.iter().map(|t| t.unwrap_or(t_end)).collect();
    let (mean, var) = mean_var(&observed);
    Ok(ExtinctionSummary {
        dt_diff: model.motion.dt_diff,
        censored: times.iter().filter(|t| t.is_none()).count(),
        se: (var / observed.len().max(1) as f64).sqrt(),
        mean,
        times,
    })
}

/// One point of the large-population convergence study.
#[derive(Clone, Debug, Serialize)]
pub struct ScalePoint {
    pub k: f64,
    pub replicates: usize,
    /// `E[max_t |N^X(t) / K - U^X(t)|]`, estimated over replicates.
    pub error: f64,
    /// Standard error of `error`.
    pub se: f64,
    /// `max_t |E[N^X(t)] / K - U^X(t)|`
    pub mean_error: f64,
    /// Standard error of the ensemble mean at the maximizing checkpoint.
    pub mean_error_se: f64,
    pub mean_u: Vec<f64>,
    pub limit_u: Vec<f64>,
}

/// Distance of the rescaled spatial ensemble from the homogeneous limit.
pub fn scale_point(cfg: &RunConfig, k: f64, replicates: usize) -> Result<ScalePoint> {
    let cfg = cfg.with_scale(k);
    let model = cfg.model()?;
    let times = cfg.times();
    let (u0x, u0y) = cfg.initial_totals()?;
    let limit_u: Vec<f64> = homogeneous_limit(&cfg)?
        .solve(u0x, u0y, &times, cfg.solver.dt)?
        .iter()
        .map(|l| l.1)
        .collect();
    let observe = Observe { times: times.clone(), events: false, snapshots: false };
    let mut acc = Accumulator::new(times.len());
    let mut path_errors = Vec::with_capacity(replicates);
    for_each_replicate(&model, &cfg.initial, cfg.seed, replicates, &observe, |tr| {
        acc.add(tr.counts.iter().map(|c| (c.1, c.2)));
        let e = tr
            .counts
            .iter()
            .zip(&limit_u)
            .map(|(c, u)| (c.1 as f64 / k - u).abs())
            .fold(0.0, f64::max);
        path_errors.push(e);
        Ok(())
    })?;
    let stats = acc.finish(&times)?;
    let (error, var) = mean_var(&path_errors);
    let mean_u: Vec<f64> = stats.mean_x.iter().map(|m| m / k).collect();
    let (mut mean_error, mut mean_error_se) = (0.0, 0.0);
    for i in 0..times.len() {
        let e = (mean_u[i] - limit_u[i]).abs();
        if e >= mean_error {
            mean_error = e;
            mean_error_se = (stats.var_x[i] / stats.n as f64).sqrt() / k;
        }
    }
    Ok(ScalePoint {
        k,
        replicates,
        error,
        se: (var / replicates as f64).sqrt(),
        mean_error,
        mean_error_se,
        mean_u,
        limit_u,
    })
}

/// Least-squares slope of `ln e` against `ln K`.
pub fn convergence_slope(points: &[ScalePoint], error: impl Fn(&ScalePoint) -> f64) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.k.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| error(p).ln()).collect();
    linear_fit(&xs, &ys).1
}

/// Homogeneous limit with the configured rates (without the `K` scaling).
pub fn homogeneous_limit(cfg: &RunConfig) -> Result<HomogeneousLimit> {
    let rates = cfg.with_scale(1.0).scalar_rates()?;
    let mut h = HomogeneousLimit::new(rates);
    if let Some(irr) = cfg.with_scale(1.0).model()?.irradiation {
        h = h.with_irradiation(&irr);
    }
    Ok(h)
}

/// What a run produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
}

fn rates_record(cfg: &RunConfig) -> Value {
    let k = cfg.scale;
    let r = &cfg.rates;
    let d_dot = cfg.irradiation.as_ref().map_or(0.0, |i| i.d_dot);
    let dose = cfg.irradiation.as_ref().map_or(0.0, |i| i.dose);
    let b = r.pair.kernel.sup();
    json!({
        "raw": { "r": r.repair.base, "a": r.death.base, "b": b, "d_dot": d_dot, "dose_events_multiplier": 1.0, "initial_multiplier": 1.0 },
        "effective": { "r": r.repair.base, "a": r.death.base, "b": b / k, "d_dot": d_dot * k, "dose": dose, "dose_events_multiplier": k, "initial_multiplier": k },
        "model": serde_json::to_value(r).unwrap_or(Value::Null),
    })
}

fn write_manifest(cfg: &RunConfig, dir: &Path, files: &[String], status: &str, error: Option<&Error>) -> Result<()> {
    let toml = cfg.to_toml_string()?;
    let manifest = json!({
        "schema_version": crate::config::SCHEMA_VERSION,
        "package_version": env!("CARGO_PKG_VERSION"),
        "mode": cfg.mode.as_str(),
        "status": status,
        "error": error.map(|e| e.to_string()),
        "config": toml,
        "config_sha256": output::sha256_hex(toml.as_bytes()),
        "master_seed": cfg.seed,
        "replicates": cfg.replicates,
        "scale": cfg.scale,
        "rng_algorithm": RNG_ALGORITHM,
        "rates": rates_record(cfg),
        "files": files,
    });
    output::write_json(&dir.join("manifest.json"), &manifest)
}

/// Executes `cfg` and writes every artifact into `out`. On failure the
/// manifest is still written with `status = "failed"`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let result = cfg.validate().and_then(|_| execute(cfg, out, &mut files));
    match result {
        Ok(summary) => {
            output::write_json(&out.join("summary.json"), &summary)?;
            files.push("summary.json".into());
            write_manifest(cfg, out, &files, "complete", None)?;
            Ok(RunReport { dir: out.to_path_buf(), files, summary })
        }
        Err(e) => {
            write_manifest(cfg, out, &files, "failed", Some(&e))?;
            Err(e)
        }
    }
}

fn execute(cfg: &RunConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    match cfg.mode {
        Mode::SpatialMc => run_spatial(cfg, out, files),
        Mode::NonspatialMc => run_nonspatial(cfg, out, files),
        Mode::Master => run_master(cfg, out, files),
        Mode::Mkm => run_mkm(cfg, out, files),
        Mode::LimitHomog => run_limit_homog(cfg, out, files),
        Mode::LimitSpatial => run_limit_spatial(cfg, out, files),
    }
}

fn open(out: &Path, name: &str, header: &str, files: &mut Vec<String>) -> Result<CsvWriter> {
    files.push(name.to_string());
    CsvWriter::create(&out.join(name), header)
}

fn run_spatial(cfg: &RunConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let model = cfg.model()?;
    let times = cfg.times();
    let opts = &cfg.output;
    let observe = Observe { times: times.clone(), events: opts.events, snapshots: opts.snapshots };
    let mut traj_w = if opts.trajectories { Some(open(out, "trajectory.csv", output::TRAJECTORY_HEADER, files)?) } else { None };
    let mut event_w = if opts.events { Some(open(out, "events.csv", output::EVENTS_HEADER, files)?) } else { None };
    let mut snap_w = if opts.snapshots { Some(open(out, "snapshots.csv", output::SNAPSHOT_HEADER, files)?) } else { None };
    let mut chem_w = match (&model.chemistry, opts.snapshots) {
        (Some(_), true) => Some(open(out, "chemistry.csv", output::FIELD_HEADER, files)?),
        _ => None,
    };
    let mut acc = Accumulator::new(times.len());
    let mut events = 0usize;
    for_each_replicate(&model, &cfg.initial, cfg.seed, cfg.replicates, &observe, |tr| {
        acc.add(tr.counts.iter().map(|c| (c.1, c.2)));
        events += tr.events.len();
        output::write_trajectory(&tr, traj_w.as_mut(), event_w.as_mut(), snap_w.as_mut())?;
        if let (Some(w), Some(solver)) = (chem_w.as_mut(), model.chemistry.as_ref()) {
            for field in &tr.chemistry {
                let names: Vec<String> = (0..field.values.len()).map(|s| format!("species_{s}")).collect();
                let cols: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(field.values.iter().map(Vec::as_slice)).collect();
                output::write_fields(w, tr.replicate, field.time, solver.grid(), &cols)?;
            }
        }
        Ok(())
    })?;
    for w in [traj_w, event_w, snap_w, chem_w].into_iter().flatten() {
        w.finish()?;
    }
    let stats = acc.finish(&times)?;
    stats.survival.write_csv(&out.join("survival.csv"))?;
    files.push("survival.csv".into());
    Ok(json!({ "mode": "spatial_mc", "counts": stats, "events_logged": events }))
}

fn run_nonspatial(cfg: &RunConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let times = cfg.times();
    let rates = cfg.scalar_rates()?;
    let law = cfg.initial_law()?;
    let keep = cfg.output.trajectories;
    let s = simulate_nonspatial(&law, &rates, &times, cfg.replicates, cfg.seed, keep)?;
    if keep {
        let mut w = open(out, "trajectory.csv", output::TRAJECTORY_HEADER, files)?;
        for (rep, path) in s.paths.iter().enumerate() {
            let rows: Vec<(f64, usize, usize)> = times.iter().zip(path).map(|(t, (x, y))| (*t, *x as usize, *y as usize)).collect();
            output::write_counts(&mut w, rep as u64, &rows)?;
        }
        w.finish()?;
    }
    let survivors: Vec<usize> = s.survival.iter().map(|f| (f * cfg.replicates as f64).round() as usize).collect();
    let est = SurvivalEstimate::from_counts(&times, &survivors, cfg.replicates)?;
    est.write_csv(&out.join("survival.csv"))?;
    files.push("survival.csv".into());
    Ok(json!({
        "mode": "nonspatial_mc",
        "rates": rates,
        "survival": est,
        "mean_x": s.mean_x,
        "mean_y": s.mean_y,
        "factorial_x": s.factorial_x,
    }))
}

fn run_master(cfg: &RunConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let times = cfg.times();
    let rates = cfg.scalar_rates()?;
    let mut solver = MasterSolver::new(rates, cfg.solver.dt);
    solver.tolerance = cfg.solver.truncation_tolerance;
    let sol = solver.solve(&cfg.initial_law()?, &times)?;
    let rows: Vec<Vec<f64>> = (0..times.len())
        .map(|i| vec![times[i], sol.survival[i], sol.mean_x[i], sol.mean_y[i], sol.factorial_x[i], sol.mass[i]])
        .collect();
    output::write_table(&out.join("master.csv"), &["t", "s", "mean_x", "mean_y", "factorial_x", "mass"], &rows)?;
    files.push("master.csv".into());
    let mut w = open(out, "survival.csv", output::SURVIVAL_HEADER, files)?;
    for i in 0..times.len() {
        w.line(&format!("{},{},{},0", fmt_f(times[i]), fmt_f(sol.survival[i]), fmt_f(0.0)))?;
    }
    w.finish()?;
    Ok(json!({
        "mode": "master",
        "rates": rates,
        "survival": sol.survival,
        "leak": sol.leak,
        "x_max": sol.x_max,
        "y_max": sol.y_max,
    }))
}

fn run_mkm(cfg: &RunConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let times = cfg.times();
    let rates = cfg.with_scale(1.0).scalar_rates()?;
    let (x0, y0) = cfg.initial_totals()?;
    let params = MkmParams { r: rates.r, a: rates.a, b: rates.b, variant: cfg.solver.mkm_variant, reduced: cfg.solver.mkm_reduced };
    let sol = solve_mkm(x0, y0, &params, &times, cfg.solver.dt);
    let rows: Vec<Vec<f64>> = sol
        .iter()
        .map(|(t, x, y)| {
            let (cx, cy) = reduced_closed_form(x0, y0, rates.r, rates.a, rates.b, *t);
            vec![*t, *x, *y, cx, cy]
        })
        .collect();
    output::write_table(&out.join("mean_trajectory.csv"), &["t", "x", "y", "x_reduced_closed_form", "y_reduced_closed_form"], &rows)?;
    files.push("mean_trajectory.csv".into());
    Ok(json!({ "mode": "mkm", "params": params, "x": sol.iter().map(|s| s.1).collect::<Vec<_>>(), "y": sol.iter().map(|s| s.2).collect::<Vec<_>>() }))
}

fn run_limit_homog(cfg: &RunConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let times = cfg.times();
    let (u0x, u0y) = cfg.initial_totals()?;
    let sol = homogeneous_limit(cfg)?.solve(u0x, u0y, &times, cfg.solver.dt)?;
    let rows: Vec<Vec<f64>> = sol.iter().map(|(t, x, y)| vec![*t, *x, *y]).collect();
    output::write_table(&out.join("limit.csv"), &["t", "u_x", "u_y"], &rows)?;
    files.push("limit.csv".into());
    Ok(json!({ "mode": "limit_homog", "u_x": rows.iter().map(|r| r[1]).collect::<Vec<_>>(), "u_y": rows.iter().map(|r| r[2]).collect::<Vec<_>>() }))
}

fn run_limit_spatial(cfg: &RunConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let times = cfg.times();
    let base = cfg.with_scale(1.0);
    let model = base.model()?;
    let lim = SpatialLimit::new(
        &model.domain,
        cfg.solver.cells_per_axis,
        &model.rates,
        &model.motion,
        model.irradiation.as_ref(),
        cfg.solver.convention,
        cfg.solver.dt,
    )?;
    let init = match &cfg.initial {
        InitialCondition::Lesions { placement: crate::engine::InitialPlacement::AtPoint { point }, x0, y0, .. } => {
            let q = crate::geometry::Point::new(point)?;
            let cell = lim.grid().locate(&q);
            let v = lim.grid().cell_volume();
            let mut f = lim.uniform_field(0.0, 0.0);
            f.ux[cell] = x0 / v;
            f.uy[cell] = y0 / v;
            f
        }
        InitialCondition::Listed { xs, ys } => {
            let mut f = lim.uniform_field(0.0, 0.0);
            let v = lim.grid().cell_volume();
            for c in xs {
                f.ux[lim.grid().locate(&crate::geometry::Point::new(c)?)] += 1.0 / v;
            }
            for c in ys {
                f.uy[lim.grid().locate(&crate::geometry::Point::new(c)?)] += 1.0 / v;
            }
            f
        }
        _ => {
            let (x, y) = cfg.initial_totals()?;
            lim.uniform_field(x, y)
        }
    };
    let fields = lim.solve(&init, &times)?;
    let mut rows = Vec::new();
    let mut w = open(out, "limit_field.csv", output::FIELD_HEADER, files)?;
    for f in &fields {
        let (x, y) = lim.totals(f);
        rows.push(vec![f.time, x, y]);
        output::write_fields(&mut w, 0, f.time, lim.grid(), &[("u_x", &f.ux), ("u_y", &f.uy)])?;
    }
    w.finish()?;
    output::write_table(&out.join("limit.csv"), &["t", "u_x", "u_y"], &rows)?;
    files.push("limit.csv".into());
    Ok(json!({ "mode": "limit_spatial", "cells": lim.grid().len(), "u_x": rows.iter().map(|r| r[1]).collect::<Vec<_>>(), "u_y": rows.iter().map(|r| r[2]).collect::<Vec<_>>() }))
}

/// Parameter varied by [`sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    DtDiff,
    Scale,
}

/// Runs a grid over `dt_diff` (extinction times with common random
/// numbers) or over `K` (error against the homogeneous limit).
pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64], out: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let result = (|| -> Result<Value> {
        if values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        cfg.validate()?;
        match param {
            SweepParam::DtDiff => {
                let mut rows = Vec::new();
                let mut summaries = Vec::new();
                for &dt in values {
                    let c = cfg.with_dt_diff(dt);
                    let s = extinction_ensemble(&c.model()?, &c.initial, c.seed, c.replicates, c.t_end)?;
                    rows.push(vec![dt, s.mean, s.se, s.times.len() as f64, s.censored as f64]);
                    summaries.push(json!({ "dt_diff": dt, "mean_extinction": s.mean, "se": s.se, "censored": s.censored }));
                }
                output::write_table(&out.join("dt_sweep.csv"), &["dt_diff", "mean_extinction", "se", "n", "censored"], &rows)?;
                files.push("dt_sweep.csv".into());
                Ok(json!({ "sweep": "dt_diff", "points": summaries }))
            }
            SweepParam::Scale => {
                let points = values.iter().map(|k| scale_point(cfg, *k, cfg.replicates)).collect::<Result<Vec<_>>>()?;
                let rows: Vec<Vec<f64>> = points
                    .iter()
                    .map(|p| vec![p.k, p.error, p.se, p.mean_error, p.mean_error_se, p.replicates as f64])
                    .collect();
                output::write_table(
                    &out.join("k_sweep.csv"),
                    &["k", "e_k", "se", "mean_error", "mean_error_se", "replicates"],
                    &rows,
                )?;
                files.push("k_sweep.csv".into());
                let (slope, mean_slope) = if points.len() >= 2 {
                    (Some(convergence_slope(&points, |p| p.error)), Some(convergence_slope(&points, |p| p.mean_error)))
                } else {
                    (None, None)
                };
                Ok(json!({ "sweep": "k", "points": points, "slope": slope, "mean_error_slope": mean_slope }))
            }
        }
    })();
    match result {
        Ok(summary) => {
            output::write_json(&out.join("summary.json"), &summary)?;
            files.push("summary.json".into());
            write_manifest(cfg, out, &files, "complete", None)?;
            Ok(RunReport { dir: out.to_path_buf(), files, summary })
        }
        Err(e) => {
            write_manifest(cfg, out, &files, "failed", Some(&e))?;
            Err(e)
        }
    }
}
