//! Microdosimetric damage sampling.
//!
//! Dose -> number of events `nu ~ Poisson(D / z_F)` -> specific energy per
//! event `z ~ f1` -> lesion counts `Poisson(kappa(z))`, `Poisson(lambda(z))`
//! -> positions around the event's track under an amorphous-track radial
//! profile (uniform core of radius `Rc`, `1/rho^2` penumbra out to `Rp`).
//! Tracks run along the last coordinate axis; in 2-D the track crosses the
//! plane at its centre.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::chemistry::{ChemField, ChemSolver};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::grid::Grid;
use crate::state::SystemState;

const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Single-event specific-energy distribution `f1` (gray).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpecificEnergy {
    Dirac { z0: f64 },
    Lognormal { log_mean: f64, log_sd: f64 },
    /// Discrete law on `z` with weights `probability` (renormalized).
    Tabulated { z: Vec<f64>, probability: Vec<f64> },
    /// Two-column CSV `z_gray,probability`, resolved into `Tabulated` when the
    /// config is loaded.
    TabulatedCsv { path: String },
}

impl SpecificEnergy {
    pub fn tabulated(z: Vec<f64>, probability: Vec<f64>) -> Result<Self> {
        if z.is_empty() || z.len() != probability.len() {
            return Err(Error::Config("tabulated f1 needs matching, non-empty z and probability columns".into()));
        }
        if z.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || probability.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config("tabulated f1 values must be finite and >= 0".into()));
        }
        let total: f64 = probability.iter().sum();
        if total <= 0.0 {
            return Err(Error::Config("tabulated f1 probabilities sum to zero".into()));
        }
        Ok(SpecificEnergy::Tabulated { z, probability: probability.iter().map(|p| p / total).collect() })
    }

    /// Reads a `z_gray,probability` table. A header row is allowed.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let (mut z, mut p) = (Vec::new(), Vec::new());
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if rec.len() != 2 {
                return Err(Error::Config(format!("{}: row {} needs two columns", path.display(), i + 1)));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    z.push(a);
                    p.push(b);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::Config(format!("{}: row {} is not numeric", path.display(), i + 1))),
            }
        }
        Self::tabulated(z, p)
    }

    /// Replaces a CSV reference by its table, resolving relative paths
    /// against `base`.
    pub fn resolve(&mut self, base: &Path) -> Result<()> {
        if let SpecificEnergy::TabulatedCsv { path } = self {
            let p = Path::new(path.as_str());
            let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            *self = Self::from_csv(&full)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpecificEnergy::Dirac { z0 } if !(z0.is_finite() && *z0 > 0.0) => {
                Err(Error::Config("dirac f1 needs z0 > 0".into()))
            }
            SpecificEnergy::Lognormal { log_sd, .. } if !(log_sd.is_finite() && *log_sd >= 0.0) => {
                Err(Error::Config("lognormal f1 needs log_sd >= 0".into()))
            }
            SpecificEnergy::Tabulated { z, probability } => Self::tabulated(z.clone(), probability.clone()).map(|_| ()),
            SpecificEnergy::TabulatedCsv { path } => {
                Err(Error::Config(format!("f1 table `{path}` was not loaded")))
            }
            _ => Ok(()),
        }
    }

    /// `E[g(Z)]`, exact for discrete laws and by quadrature for the lognormal.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        match self {
            SpecificEnergy::Dirac { z0 } => g(*z0),
            SpecificEnergy::Tabulated { z, probability } => z.iter().zip(probability).map(|(z, p)| p * g(*z)).sum(),
            SpecificEnergy::Lognormal { log_mean, log_sd } => {
                if *log_sd == 0.0 {
                    return g(log_mean.exp());
                }
                // composite Simpson over the standard normal on [-12, 12]
                let n = 4000;
                let h = 24.0 / n as f64;
                let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
                (0..=n)
                    .map(|i| {
                        let x = -12.0 + i as f64 * h;
                        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                        w * phi(x) * g((log_mean + log_sd * x).exp())
                    })
                    .sum::<f64>()
                    * h
                    / 3.0
            }
            SpecificEnergy::TabulatedCsv { .. } => f64::NAN,
        }
    }

    /// Mean specific energy `z_F`.
    pub fn mean(&self) -> f64 {
        match self {
            SpecificEnergy::Lognormal { log_mean, log_sd } => (log_mean + 0.5 * log_sd * log_sd).exp(),
            _ => self.expect(|z| z),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SpecificEnergy::Dirac { z0 } => *z0,
            SpecificEnergy::Lognormal { log_mean, log_sd } => {
                LogNormal::new(*log_mean, *log_sd).expect("validated lognormal").sample(rng)
            }
            SpecificEnergy::Tabulated { z, probability } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (zi, pi) in z.iter().zip(probability) {
                    acc += pi;
                    if u < acc {
                        return *zi;
                    }
                }
                // rounding left u above the last partial sum
                *z.iter().zip(probability).rev().find(|(_, p)| **p > 0.0).expect("non-empty table").0
            }
            SpecificEnergy::TabulatedCsv { .. } => f64::NAN,
        }
    }
}

/// Lesion yield per event as a function of specific energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Yield {
    /// `coef * z`
    Linear { coef: f64 },
    /// Piecewise linear in `z`, constant beyond the table ends.
    Tabulated { z: Vec<f64>, value: Vec<f64> },
}

impl Default for Yield {
    fn default() -> Self {
        Yield::Linear { coef: 0.0 }
    }
}

impl Yield {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Yield::Linear { coef } => coef * z,
            Yield::Tabulated { z: zs, value } => {
                if z <= zs[0] {
                    return value[0];
                }
                for k in 1..zs.len() {
                    if z <= zs[k] {
                        let w = (z - zs[k - 1]) / (zs[k] - zs[k - 1]);
                        return value[k - 1] + w * (value[k] - value[k - 1]);
                    }
                }
                value[value.len() - 1]
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Yield::Linear { coef } => coef.is_finite() && *coef >= 0.0,
            Yield::Tabulated { z, value } => {
                !z.is_empty()
                    && z.len() == value.len()
                    && z.windows(2).all(|w| w[1] > w[0])
                    && value.iter().all(|v| v.is_finite() && *v >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{name}: yields must be >= 0 (tables need increasing z)")))
        }
    }
}

/// Where track centres fall.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrackPlacement {
    #[default]
    Uniform,
    AtPoint { point: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmorphousTrack {
    pub core_radius: f64,
    pub penumbra_radius: f64,
}

impl AmorphousTrack {
    /// Probability that a lesion falls in the core: the core carries mass
    /// `pi` and the penumbra `2 pi ln(Rp/Rc)` under the unnormalized profile.
    pub fn core_probability(&self) -> f64 {
        1.0 / (1.0 + 2.0 * (self.penumbra_radius / self.core_radius).ln())
    }

    /// Unnormalized radial profile.
    pub fn profile(&self, rho: f64) -> f64 {
        if rho <= self.core_radius {
            1.0 / (self.core_radius * self.core_radius)
        } else if rho <= self.penumbra_radius {
            1.0 / (rho * rho)
        } else {
            0.0
        }
    }

    /// Radius drawn from the untruncated planar profile.
    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if rng.random::<f64>() < self.core_probability() {
            self.core_radius * u.sqrt()
        } else {
            self.core_radius * (self.penumbra_radius / self.core_radius).powf(u)
        }
    }
}

/// Coupling of lesion yields to a chemistry field: yields are multiplied by
/// `1 + gain * rho_species` at the track centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemCoupling {
    pub species: usize,
    #[serde(default)]
    pub kappa_gain: f64,
    #[serde(default)]
    pub lambda_gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrradiationModel {
    /// Acute dose delivered at t = 0 (Gy).
    #[serde(default)]
    pub dose: f64,
    /// Declared mean of `f1`; checked against the distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_f: Option<f64>,
    pub f1: SpecificEnergy,
    pub kappa: Yield,
    #[serde(default)]
    pub lambda: Yield,
    #[serde(default)]
    pub tracks: TrackPlacement,
    /// Radial profile; without one, lesions are uniform over the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<AmorphousTrack>,
    /// Protracted irradiation: events per hour while `t < t_irr`.
    #[serde(default)]
    pub d_dot: f64,
    #[serde(default)]
    pub t_irr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<ChemCoupling>,
    /// Population scale `K`: multiplies the acute event mean and `d_dot`.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}
fn is_one(x: &f64) -> bool {
    *x == 1.0
}

/// Lesions created by one irradiation event.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub center: Point,
    pub z: f64,
    pub xs: Vec<Point>,
    pub ys: Vec<Point>,
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::Numerical(format!("poisson({mean}): {e}")))?;
    Ok(d.sample(rng) as u64)
}

impl IrradiationModel {
    pub fn new(f1: SpecificEnergy, kappa: Yield) -> Self {
        Self {
            dose: 0.0,
            z_f: None,
            f1,
            kappa,
            lambda: Yield::default(),
            tracks: TrackPlacement::Uniform,
            radial: None,
            d_dot: 0.0,
            t_irr: 0.0,
            coupling: None,
            scale: 1.0,
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        self.f1.validate()?;
        self.kappa.validate("kappa")?;
        self.lambda.validate("lambda")?;
        let zf = self.f1.mean();
        if !(zf > 0.0 && zf.is_finite()) {
            return Err(Error::Config(format!("z_F must be positive, got {zf}")));
        }
        if let Some(declared) = self.z_f {
            if !(declared > 0.0) || ((declared - zf) / zf).abs() > 1e-6 {
                return Err(Error::Config(format!("declared z_F {declared} differs from the f1 mean {zf}")));
            }
        }
        for (name, v) in [("dose", self.dose), ("d_dot", self.d_dot), ("t_irr", self.t_irr)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("irradiation.{name} must be finite and >= 0")));
            }
        }
        if let Some(at) = &self.radial {
            if !(at.core_radius > 0.0 && at.penumbra_radius > at.core_radius && at.penumbra_radius.is_finite()) {
                return Err(Error::Config("amorphous track needs 0 < core_radius < penumbra_radius".into()));
            }
        }
        if let TrackPlacement::AtPoint { point } = &self.tracks {
            let p = Point::new(point)?;
            if !domain.contains(&p)? {
                return Err(Error::Config("track point lies outside the domain".into()));
            }
        }
        if !(self.scale >= 1.0 && self.scale.is_finite()) {
            return Err(Error::Config("irradiation scale must be >= 1".into()));
        }
        Ok(())
    }

    pub fn z_f(&self) -> f64 {
        self.f1.mean()
    }

    /// Mean number of acute events `K D / z_F`.
    pub fn mean_events(&self) -> f64 {
        self.scale * self.dose / self.z_f()
    }

    /// Effective event rate `K d_dot` while `t < t_irr`.
    pub fn event_rate(&self, t: f64) -> f64 {
        if t < self.t_irr {
            self.scale * self.d_dot
        } else {
            0.0
        }
    }

    /// `(E[kappa(Z)], E[lambda(Z)])` without chemistry coupling.
    pub fn mean_yields(&self) -> (f64, f64) {
        (self.f1.expect(|z| self.kappa.eval(z)), self.f1.expect(|z| self.lambda.eval(z)))
    }

    pub fn rescaled(&self, k: f64) -> Self {
        Self { scale: k, ..self.clone() }
    }

    pub fn sample_event_count<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        poisson(self.mean_events(), rng)
    }

    fn sample_center<R: Rng + ?Sized>(&self, domain: &Domain, rng: &mut R) -> Result<Point> {
        match &self.tracks {
            TrackPlacement::Uniform => Ok(domain.sample_uniform(rng)),
            TrackPlacement::AtPoint { point } => Point::new(point),
        }
    }

    /// Position of one lesion belonging to the track through `center`.
    pub fn sample_lesion<R: Rng + ?Sized>(&self, center: &Point, domain: &Domain, rng: &mut R) -> Result<Point> {
        let Some(at) = &self.radial else {
            return Ok(domain.sample_uniform(rng));
        };
        let dim = domain.dim();
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let rho = at.sample_radius(rng);
            let theta = 2.0 * PI * rng.random::<f64>();
            let mut q = *center;
            q.set(0, center.get(0) + rho * theta.cos());
            q.set(1, center.get(1) + rho * theta.sin());
            if dim == 3 {
                let Some((lo, hi)) = domain.chord_along_last_axis(&q) else { continue };
                q.set(2, lo + (hi - lo) * rng.random::<f64>());
            }
            if domain.contains_unchecked(&q) {
                return Ok(q);
            }
        }
        Err(Error::Numerical(format!("no lesion position found in the domain around track {center:?}")))
    }

    /// Yield multipliers from the chemistry coupling at `center`.
    fn coupling_factors(&self, center: &Point, chem: Option<(&ChemSolver, &ChemField)>) -> Result<(f64, f64)> {
        match (&self.coupling, chem) {
            (Some(c), Some((solver, field))) => {
                let rho = solver.value_at(field, c.species, center)?;
                Ok((1.0 + c.kappa_gain * rho, 1.0 + c.lambda_gain * rho))
            }
            _ => Ok((1.0, 1.0)),
        }
    }

    /// One event: track centre, specific energy, lesion counts and positions.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        domain: &Domain,
        chem: Option<(&ChemSolver, &ChemField)>,
        rng: &mut R,
    ) -> Result<Batch> {
        let center = self.sample_center(domain, rng)?;
        let z = self.f1.sample(rng);
        let (fk, fl) = self.coupling_factors(&center, chem)?;
        let nx = poisson(self.kappa.eval(z) * fk, rng)?;
        let ny = poisson(self.lambda.eval(z) * fl, rng)?;
        let xs = (0..nx).map(|_| self.sample_lesion(&center, domain, rng)).collect::<Result<Vec<_>>>()?;
        let ys = (0..ny).map(|_| self.sample_lesion(&center, domain, rng)).collect::<Result<Vec<_>>>()?;
        Ok(Batch { center, z, xs, ys })
    }

    /// Initial configuration at `t = 0` from the acute dose.
    pub fn sample_initial<R: Rng + ?Sized>(&self, domain: &Domain, rng: &mut R) -> Result<SystemState> {
        let events = self.sample_event_count(rng)?;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for _ in 0..events {
            let b = self.sample_batch(domain, None, rng)?;
            xs.extend(b.xs);
            ys.extend(b.ys);
        }
        SystemState::with_dim(domain.dim(), 0.0, xs, ys)
    }

    /// Normalized spatial profile of one event's deposit on `grid`
    /// (integrates to one). Falls back to the nearest cell when the profile
    /// is narrower than the cells.
    pub fn footprint_shape(&self, center: &Point, grid: &Grid) -> Vec<f64> {
        let v = grid.cell_volume();
        let mut shape: Vec<f64> = match &self.radial {
            None => vec![1.0; grid.len()],
            Some(at) => grid
                .centers()
                .iter()
                .map(|c| {
                    let planar = (c.get(0) - center.get(0)).hypot(c.get(1) - center.get(1));
                    at.profile(planar)
                })
                .collect(),
        };
        let total: f64 = shape.iter().sum::<f64>() * v;
        if total > 0.0 {
            shape.iter_mut().for_each(|s| *s /= total);
        } else {
            shape[grid.locate(center)] = 1.0 / v;
        }
        shape
    }
}
