//! Reaction-diffusion chemistry on a cell grid with jump forcing.
//!
//! `d rho_i/dt = D_i Lap rho_i + f_i(rho)` with zero-flux boundaries, solved
//! by explicit Euler. Irradiation events add a non-negative footprint to the
//! fields at their jump times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::grid::Grid;

/// Values above this (negative) threshold are clipped to zero after a step.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

/// Members of the shipped reaction library. Each is quasi-positive and mass
/// controlled by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reaction {
    /// `f_s = -rate * rho_s`
    LinearDecay { species: usize, rate: f64 },
    /// `A + B -> C` with mass action `rate * rho_A * rho_B`.
    Bimolecular { a: usize, b: usize, product: usize, rate: f64 },
    /// `f_s = growth * rho_s * (1 - rho_s / capacity)`
    Logistic { species: usize, growth: f64, capacity: f64 },
}

impl Reaction {
    fn species(&self) -> Vec<usize> {
        match *self {
            Reaction::LinearDecay { species, .. } | Reaction::Logistic { species, .. } => vec![species],
            Reaction::Bimolecular { a, b, product, .. } => vec![a, b, product],
        }
    }

    fn validate(&self, n_species: usize) -> Result<()> {
        if let Some(s) = self.species().into_iter().find(|s| *s >= n_species) {
            return Err(Error::Config(format!("reaction {self:?} refers to species {s} of {n_species}")));
        }
        let ok = match *self {
            Reaction::LinearDecay { rate, .. } => rate >= 0.0 && rate.is_finite(),
            Reaction::Bimolecular { a, b, rate, .. } => a != b && rate >= 0.0 && rate.is_finite(),
            Reaction::Logistic { growth, capacity, .. } => growth >= 0.0 && capacity > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("reaction {self:?} has invalid parameters")))
        }
    }

    /// Constants `(C0, C1)` with `sum_i f_i <= C0 + C1 sum_i rho_i` on the
    /// non-negative orthant.
    pub fn mass_bound(&self) -> (f64, f64) {
        match *self {
            Reaction::LinearDecay { .. } | Reaction::Bimolecular { .. } => (0.0, 0.0),
            Reaction::Logistic { growth, .. } => (0.0, growth),
        }
    }

    #[inline]
    fn accumulate(&self, rho: &dyn Fn(usize) -> f64, out: &mut [f64]) {
        match *self {
            Reaction::LinearDecay { species, rate } => out[species] -= rate * rho(species),
            Reaction::Bimolecular { a, b, product, rate } => {
                let flux = rate * rho(a) * rho(b);
                out[a] -= flux;
                out[b] -= flux;
                out[product] += flux;
            }
            Reaction::Logistic { species, growth, capacity } => {
                let r = rho(species);
                out[species] += growth * r * (1.0 - r / capacity);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemistryModel {
    /// One diffusion coefficient per species; fixes the species count.
    pub diffusion: Vec<f64>,
    #[serde(default)]
    pub reactions: Vec<Reaction>,
    /// Uniform initial concentration per species.
    pub initial: Vec<f64>,
    pub cells_per_axis: usize,
    pub dt: f64,
    /// Amount of each species deposited per gray of specific energy by one
    /// irradiation event.
    #[serde(default)]
    pub footprint_yield: Vec<f64>,
}

impl ChemistryModel {
    pub fn species(&self) -> usize {
        self.diffusion.len()
    }

    /// Declared `(C0, C1)` of the whole network.
    pub fn mass_bound(&self) -> (f64, f64) {
        self.reactions.iter().map(Reaction::mass_bound).fold((0.0, 0.0), |acc, b| (acc.0 + b.0, acc.1 + b.1))
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.species();
        if l == 0 {
            return Err(Error::Config("chemistry needs at least one species".into()));
        }
        if self.initial.len() != l || (!self.footprint_yield.is_empty() && self.footprint_yield.len() != l) {
            return Err(Error::Config(format!("chemistry: initial and footprint_yield need {l} entries")));
        }
        if self.diffusion.iter().chain(&self.initial).chain(&self.footprint_yield).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("chemistry: coefficients and initial values must be >= 0".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config("chemistry.dt must be positive".into()));
        }
        self.reactions.iter().try_for_each(|r| r.validate(l))
    }
}

/// Concentration fields, `values[species][cell]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChemField {
    pub time: f64,
    pub values: Vec<Vec<f64>>,
}

/// A validated chemistry model bound to its grid.
#[derive(Clone, Debug)]
pub struct ChemSolver {
    model: ChemistryModel,
    grid: Grid,
}

impl ChemSolver {
    pub fn new(model: ChemistryModel, domain: &Domain) -> Result<Self> {
        model.validate()?;
        let grid = Grid::new(domain, model.cells_per_axis)?;
        let solver = Self { model, grid };
        solver.check_stability(solver.model.dt)?;
        Ok(solver)
    }

    pub fn model(&self) -> &ChemistryModel {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Explicit diffusion gate `dt <= h^2 / (2 d max D)`.
    pub fn max_stable_dt(&self) -> f64 {
        let dmax = self.model.diffusion.iter().copied().fold(0.0, f64::max);
        if dmax == 0.0 {
            return f64::INFINITY;
        }
        let h = self.grid.min_spacing();
        h * h / (2.0 * self.grid.dim() as f64 * dmax)
    }

    fn check_stability(&self, dt: f64) -> Result<()> {
        let limit = self.max_stable_dt();
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!("chemistry dt {dt} exceeds the stability limit {limit}")));
        }
        Ok(())
    }

    pub fn initial_field(&self) -> ChemField {
        ChemField {
            time: 0.0,
            values: self.model.initial.iter().map(|&v| vec![v; self.grid.len()]).collect(),
        }
    }

    /// One explicit Euler step of length `dt`.
    pub fn step(&self, field: &mut ChemField, dt: f64) -> Result<()> {
        self.check_stability(dt)?;
        let l = self.model.species();
        let n = self.grid.len();
        let mut next = field.values.clone();
        let mut rate = vec![0.0; l];
        for c in 0..n {
            rate.iter_mut().for_each(|r| *r = 0.0);
            let rho = |s: usize| field.values[s][c];
            for reaction in &self.model.reactions {
                reaction.accumulate(&rho, &mut rate);
            }
            for s in 0..l {
                let d = self.model.diffusion[s];
                let lap = if d > 0.0 { d * self.grid.laplacian(&field.values[s], c) } else { 0.0 };
                next[s][c] += dt * (lap + rate[s]);
            }
        }
        for (s, species) in next.iter_mut().enumerate() {
            for (c, v) in species.iter_mut().enumerate() {
                if *v < 0.0 {
                    if *v < -NEGATIVITY_TOLERANCE {
                        return Err(Error::Negativity { cell: c + s * n, value: *v });
                    }
                    *v = 0.0;
                }
            }
        }
        field.values = next;
        field.time += dt;
        Ok(())
    }

    /// Advances by `duration` in steps of the configured `dt` plus a final
    /// partial step.
    pub fn advance(&self, field: &mut ChemField, duration: f64) -> Result<()> {
        let target = field.time + duration;
        while target - field.time > 1e-12 * target.abs().max(1.0) {
            let h = self.model.dt.min(target - field.time);
            self.step(field, h)?;
        }
        field.time = target;
        Ok(())
    }

    /// Adds the jump footprint `z[species][cell]` to the fields.
    pub fn inject(&self, field: &mut ChemField, z: &[Vec<f64>]) -> Result<()> {
        if z.len() != field.values.len() || z.iter().any(|s| s.len() != self.grid.len()) {
            return Err(Error::Input("footprint shape does not match the chemistry grid".into()));
        }
        if let Some(v) = z.iter().flatten().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Input(format!("footprint value {v} is negative or not finite")));
        }
        for (f, zs) in field.values.iter_mut().zip(z) {
            for (v, dz) in f.iter_mut().zip(zs) {
                *v += dz;
            }
        }
        Ok(())
    }

    /// Footprint of one event with specific energy `z` whose spatial profile
    /// is `shape` (a density integrating to one over the grid).
    pub fn event_footprint(&self, shape: &[f64], z: f64) -> Vec<Vec<f64>> {
        self.model
            .footprint_yield
            .iter()
            .map(|y| shape.iter().map(|s| y * z * s).collect())
            .collect()
    }

    /// `int rho_s` over the grid.
    pub fn mass(&self, field: &ChemField, species: usize) -> f64 {
        self.grid.integrate(&field.values[species])
    }

    pub fn total_mass(&self, field: &ChemField) -> f64 {
        (0..field.values.len()).map(|s| self.mass(field, s)).sum()
    }

    /// Nearest-cell value of `species` at `q`.
    pub fn value_at(&self, field: &ChemField, species: usize, q: &Point) -> Result<f64> {
        if q.dim() != self.grid.dim() {
            return Err(Error::Config("chemistry grid does not cover the particle domain".into()));
        }
        field
            .values
            .get(species)
            .map(|f| f[self.grid.locate(q)])
            .ok_or_else(|| Error::Config(format!("chemistry has no species {species}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn model(diffusion: Vec<f64>, reactions: Vec<Reaction>, initial: Vec<f64>, dt: f64) -> ChemistryModel {
        let l = diffusion.len();
        ChemistryModel { diffusion, reactions, initial, cells_per_axis: 16, dt, footprint_yield: vec![1.0; l] }
    }

    #[test]
    fn uniform_field_is_stationary_without_reactions() {
        let s = ChemSolver::new(model(vec![1.0], vec![], vec![2.5], 1e-4), &Domain::unit_square()).unwrap();
        let mut f = s.initial_field();
        for _ in 0..10 {
            s.step(&mut f, 1e-4).unwrap();
        }
        assert!(f.values[0].iter().all(|v| *v == 2.5));
    }

    #[test]
    fn diffusion_conserves_mass() {
        let dom = Domain::disk(Point::xy(0.0, 0.0), 1.0).unwrap();
        let s = ChemSolver::new(model(vec![0.3, 1.0], vec![], vec![0.0, 0.0], 1e-3), &dom).unwrap();
        let mut f = s.initial_field();
        let mut rng = stream(3, 0);
        for sp in f.values.iter_mut() {
            for v in sp.iter_mut() {
                *v = rng.random::<f64>();
            }
        }
        let m0 = s.total_mass(&f);
        for _ in 0..500 {
            s.step(&mut f, 1e-3).unwrap();
        }
        assert!((s.total_mass(&f) - m0).abs() <= 1e-12 * m0);
    }

    #[test]
    fn linear_decay_matches_exponential() {
        let k = 2.0;
        let dt = 1e-4;
        let s = ChemSolver::new(
            model(vec![0.0], vec![Reaction::LinearDecay { species: 0, rate: k }], vec![1.0], dt),
            &Domain::unit_square(),
        )
        .unwrap();
        let mut f = s.initial_field();
        s.step(&mut f, dt).unwrap();
        assert!((f.values[0][0] - (1.0 - k * dt)).abs() < 1e-15);
        s.advance(&mut f, 1.0 - dt).unwrap();
        let exact = (-k * 1.0f64).exp();
        // first-order global error ~ t k^2 dt / 2 * e^{-kt}
        assert!((f.values[0][7] - exact).abs() < k * k * dt * exact);
    }

    #[test]
    fn stability_gate_is_a_config_error() {
        let err = ChemSolver::new(model(vec![1.0], vec![], vec![0.0], 1.0), &Domain::unit_square()).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn injection_examples() {
        let s = ChemSolver::new(model(vec![0.0], vec![], vec![1.0], 1e-3), &Domain::unit_square()).unwrap();
        let mut f = s.initial_field();
        let before = f.clone();
        s.inject(&mut f, &[vec![0.0; s.grid().len()]]).unwrap();
        assert_eq!(f, before);
        s.inject(&mut f, &[vec![0.25; s.grid().len()]]).unwrap();
        assert!(f.values[0].iter().all(|v| *v == 1.25));
        let err = s.inject(&mut f, &[vec![-1.0; s.grid().len()]]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn bimolecular_stays_nonnegative() {
        let reactions = vec![
            Reaction::Bimolecular { a: 0, b: 1, product: 2, rate: 5.0 },
            Reaction::LinearDecay { species: 2, rate: 0.5 },
            Reaction::Logistic { species: 1, growth: 1.0, capacity: 2.0 },
        ];
        let s = ChemSolver::new(model(vec![0.1, 0.2, 0.05], reactions, vec![0.0; 3], 1e-3), &Domain::unit_square()).unwrap();
        let mut f = s.initial_field();
        let mut rng = stream(9, 0);
        for sp in f.values.iter_mut() {
            for v in sp.iter_mut() {
                *v = rng.random::<f64>();
            }
        }
        for _ in 0..1000 {
            s.step(&mut f, 1e-3).unwrap();
            assert!(f.values.iter().flatten().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn mass_bound_constants() {
        let m = model(
            vec![0.0; 2],
            vec![
                Reaction::Logistic { species: 0, growth: 0.7, capacity: 1.0 },
                Reaction::Bimolecular { a: 0, b: 1, product: 1, rate: 1.0 },
            ],
            vec![0.0; 2],
            1e-3,
        );
        assert_eq!(m.mass_bound(), (0.0, 0.7));
    }

    #[test]
    fn invalid_reactions_rejected() {
        let m = model(vec![0.0], vec![Reaction::LinearDecay { species: 3, rate: 1.0 }], vec![0.0], 1e-3);
        assert!(m.validate().is_err());
        let m = model(vec![0.0; 2], vec![Reaction::Bimolecular { a: 0, b: 0, product: 1, rate: 1.0 }], vec![0.0; 2], 1e-3);
        assert!(m.validate().is_err());
    }
}
