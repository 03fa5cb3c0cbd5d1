//! Jump-diffusion simulator.
//!
//! Each channel (repair, death, pair, irradiation) carries a residual
//! unit-exponential clock. Time advances in substeps of at most `dt_diff`;
//! channel totals are frozen at the start of a substep, the first clock to
//! run out inside the substep fires, diffusion is advanced to that instant
//! and the consumed hazard is subtracted from every clock. Only the channel
//! that fired draws a fresh clock. With frozen totals this is the same law as
//! drawing one exponential per substep, and it couples runs that differ only
//! in `dt_diff` through common random numbers.
//!
//! When motion is frozen the totals cannot change between events, so a
//! substep extends to the next event or horizon and the scheme is exact.

use std::fmt;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::chemistry::{ChemField, ChemSolver};
use crate::diffusion::MotionModel;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::irradiation::IrradiationModel;
use crate::rates::RateModel;
use crate::rng::{ReplicateStreams, SimRng};
use crate::state::{Exclude, LesionType, SystemState};

pub const DEFAULT_N_MAX: usize = 1_000_000;

const REPAIR: usize = 0;
const DEATH: usize = 1;
const PAIR: usize = 2;
const IRRADIATION: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Repair,
    Death,
    PairLethal,
    PairRepair,
    Irradiation,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Repair => "repair",
            Channel::Death => "death",
            Channel::PairLethal => "pair_lethal",
            Channel::PairRepair => "pair_repair",
            Channel::Irradiation => "irradiation",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub replicate: u64,
    pub time: f64,
    pub channel: Channel,
    /// Positions of the X lesions removed.
    pub removed: Vec<Point>,
    pub created: Vec<(LesionType, Point)>,
}

impl EventRecord {
    /// `(Delta N^X, Delta N^Y)` caused by the event.
    pub fn delta(&self) -> (i64, i64) {
        let cx = self.created.iter().filter(|(t, _)| *t == LesionType::X).count() as i64;
        let cy = self.created.len() as i64 - cx;
        (cx - self.removed.len() as i64, cy)
    }

    /// Channel-consistent cardinalities.
    pub fn is_consistent(&self) -> bool {
        let (r, c) = (self.removed.len(), self.created.len());
        let all_y = self.created.iter().all(|(t, _)| *t == LesionType::Y);
        match self.channel {
            Channel::Repair => r == 1 && c == 0,
            Channel::Death => r == 1 && c == 1 && all_y,
            Channel::PairLethal => r == 2 && c == 1 && all_y,
            Channel::PairRepair => r == 2 && c == 0,
            Channel::Irradiation => r == 0,
        }
    }
}

/// Placement of initial lesions given by counts.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPlacement {
    #[default]
    Uniform,
    AtPoint { point: Vec<f64> },
}

/// Law of the configuration at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `x0` X and `y0` Y lesions (Poisson with those means if `poisson`),
    /// multiplied by `K` under rescaling.
    Lesions {
        x0: f64,
        #[serde(default)]
        y0: f64,
        #[serde(default)]
        poisson: bool,
        #[serde(default)]
        placement: InitialPlacement,
    },
    /// Sample from the acute dose of the irradiation model.
    Dose,
    Listed {
        xs: Vec<Vec<f64>>,
        #[serde(default)]
        ys: Vec<Vec<f64>>,
    },
}

impl InitialCondition {
    pub fn lesions(x0: usize, y0: usize) -> Self {
        InitialCondition::Lesions { x0: x0 as f64, y0: y0 as f64, poisson: false, placement: InitialPlacement::Uniform }
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        match self {
            InitialCondition::Lesions { x0, y0, poisson, placement } => {
                for v in [x0, y0] {
                    if !(v.is_finite() && *v >= 0.0) || (!poisson && v.fract() != 0.0) {
                        return Err(Error::Config(format!("initial count {v} must be a non-negative integer (or a Poisson mean)")));
                    }
                }
                if let InitialPlacement::AtPoint { point } = placement {
                    if !model.domain.contains(&Point::new(point)?)? {
                        return Err(Error::Config("initial point lies outside the domain".into()));
                    }
                }
                Ok(())
            }
            InitialCondition::Dose => match &model.irradiation {
                Some(_) => Ok(()),
                None => Err(Error::Config("dose initial condition needs an irradiation model".into())),
            },
            InitialCondition::Listed { xs, ys } => {
                if model.scale() != 1.0 {
                    return Err(Error::Config("listed initial lesions cannot be rescaled (K must be 1)".into()));
                }
                for c in xs.iter().chain(ys) {
                    if !model.domain.contains(&Point::new(c)?)? {
                        return Err(Error::Config(format!("initial lesion {c:?} lies outside the domain")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn sample(&self, model: &Model, rng: &mut SimRng) -> Result<SystemState> {
        let dim = model.domain.dim();
        let k = model.scale();
        match self {
            InitialCondition::Lesions { x0, y0, poisson, placement } => {
                let count = |mean: f64, rng: &mut SimRng| -> Result<usize> {
                    let m = mean * k;
                    if !*poisson {
                        return Ok(m.round() as usize);
                    }
                    if m == 0.0 {
                        return Ok(0);
                    }
                    let d = rand_distr::Poisson::new(m).map_err(|e| Error::Config(format!("poisson initial: {e}")))?;
                    Ok(rng.sample(d) as usize)
                };
                let nx = count(*x0, rng)?;
                let ny = count(*y0, rng)?;
                let place = |rng: &mut SimRng| -> Result<Point> {
                    match placement {
                        InitialPlacement::Uniform => Ok(model.domain.sample_uniform(rng)),
                        InitialPlacement::AtPoint { point } => Point::new(point),
                    }
                };
                let xs = (0..nx).map(|_| place(rng)).collect::<Result<Vec<_>>>()?;
                let ys = (0..ny).map(|_| place(rng)).collect::<Result<Vec<_>>>()?;
                SystemState::with_dim(dim, 0.0, xs, ys)
            }
            InitialCondition::Dose => model
                .irradiation
                .as_ref()
                .ok_or_else(|| Error::Config("dose initial condition needs an irradiation model".into()))?
                .sample_initial(&model.domain, rng),
            InitialCondition::Listed { xs, ys } => {
                let pts = |v: &Vec<Vec<f64>>| v.iter().map(|c| Point::new(c)).collect::<Result<Vec<_>>>();
                SystemState::with_dim(dim, 0.0, pts(xs)?, pts(ys)?)
            }
        }
    }
}

/// Everything that defines the dynamics; shared read-only by replicates.
#[derive(Clone, Debug)]
pub struct Model {
    pub domain: Domain,
    pub rates: RateModel,
    pub motion: MotionModel,
    pub irradiation: Option<IrradiationModel>,
    pub chemistry: Option<ChemSolver>,
    pub n_max: usize,
}

impl Model {
    pub fn new(domain: Domain, rates: RateModel, motion: MotionModel) -> Self {
        Self { domain, rates, motion, irradiation: None, chemistry: None, n_max: DEFAULT_N_MAX }
    }

    pub fn with_irradiation(mut self, irr: IrradiationModel) -> Self {
        self.irradiation = Some(irr);
        self
    }

    pub fn with_chemistry(mut self, chem: ChemSolver) -> Self {
        self.chemistry = Some(chem);
        self
    }

    /// Applies the population scale `K` to the rates and the irradiation source.
    pub fn rescaled(mut self, k: f64) -> Self {
        self.rates = self.rates.rescaled(k);
        self.irradiation = self.irradiation.map(|i| i.rescaled(k));
        self
    }

    pub fn scale(&self) -> f64 {
        self.rates.scale
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.motion.validate(self.domain.dim())?;
        if let Some(irr) = &self.irradiation {
            irr.validate(&self.domain)?;
            if let (Some(c), Some(chem)) = (&irr.coupling, &self.chemistry) {
                if c.species >= chem.model().species() {
                    return Err(Error::Config(format!("coupling species {} does not exist", c.species)));
                }
            }
        }
        if let Some(chem) = &self.chemistry {
            if chem.grid().dim() != self.domain.dim() {
                return Err(Error::Config("chemistry grid does not cover the particle domain".into()));
            }
        }
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be positive".into()));
        }
        Ok(())
    }

    fn irradiation_rate(&self, t: f64) -> f64 {
        self.irradiation.as_ref().map_or(0.0, |i| i.event_rate(t))
    }

    /// Next time after `t` at which the irradiation rate switches off.
    fn irradiation_switch(&self, t: f64) -> Option<f64> {
        self.irradiation.as_ref().filter(|i| i.d_dot > 0.0 && t < i.t_irr).map(|i| i.t_irr)
    }
}

/// Per-lesion (or per-pair) weights frozen at the start of a substep.
#[derive(Clone, Debug)]
enum Weights {
    /// Every candidate has the same rate.
    Uniform { each: f64, candidates: usize },
    Explicit { weights: Vec<f64>, total: f64 },
    /// Pair weights stored as row sums; rows are re-evaluated against the
    /// substep-start snapshot when a pair is selected.
    Rows { rows: Vec<f64>, total: f64 },
}

impl Weights {
    fn total(&self) -> f64 {
        match self {
            Weights::Uniform { each, candidates } => each * *candidates as f64,
            Weights::Explicit { total, .. } | Weights::Rows { total, .. } => *total,
        }
    }
}

fn pick(weights: &[f64], total: f64, u: f64, name: &'static str) -> Result<usize> {
    if !(total > 0.0) {
        return Err(Error::StaleTotals(name));
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            acc += w;
            last = Some(i);
            if target < acc {
                return Ok(i);
            }
        }
    }
    last.ok_or(Error::StaleTotals(name))
}

/// Observation plan of one replicate.
#[derive(Clone, Debug, Default)]
pub struct Observe {
    /// Output times for `(t, N^X, N^Y)` rows and snapshots (ascending).
    pub times: Vec<f64>,
    pub events: bool,
    pub snapshots: bool,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub replicate: u64,
    pub initial_counts: (usize, usize),
    /// `(t, N^X, N^Y)` at the observation times.
    pub counts: Vec<(f64, usize, usize)>,
    pub events: Vec<EventRecord>,
    pub snapshots: Vec<SystemState>,
    /// Chemistry fields at the observation times, when snapshots are kept.
    pub chemistry: Vec<ChemField>,
    pub final_state: SystemState,
}

/// One replicate in progress.
pub struct Simulation<'m> {
    model: &'m Model,
    state: SystemState,
    chem: Option<ChemField>,
    clocks: [f64; 4],
    streams: ReplicateStreams,
    replicate: u64,
    snapshot: Option<SystemState>,
    skip_idle: bool,
}

impl<'m> Simulation<'m> {
    pub fn new(model: &'m Model, state: SystemState, master_seed: u64, replicate: u64) -> Result<Self> {
        if state.dim() != model.domain.dim() {
            return Err(Error::DimensionMismatch { expected: model.domain.dim(), got: state.dim() });
        }
        state.check_in(&model.domain)?;
        let mut streams = ReplicateStreams::new(master_seed, replicate);
        let clocks = [(); 4].map(|_| streams.jump.sample::<f64, _>(Exp1));
        let chem = model.chemistry.as_ref().map(|c| {
            let mut f = c.initial_field();
            f.time = state.time();
            f
        });
        let sim = Self { model, state, chem, clocks, streams, replicate, snapshot: None, skip_idle: true };
        sim.check_population()?;
        Ok(sim)
    }

    /// Seeds the initial state from the initial-condition stream of the replicate.
    pub fn from_initial(model: &'m Model, initial: &InitialCondition, master_seed: u64, replicate: u64) -> Result<Self> {
        let mut streams = ReplicateStreams::new(master_seed, replicate);
        let state = initial.sample(model, &mut streams.initial)?;
        Self::new(model, state, master_seed, replicate)
    }

    /// Whether stretches with no possible reaction may skip diffusion. Only
    /// positions (never counts) are affected; disable when snapshots matter.
    pub fn set_skip_idle(&mut self, skip: bool) {
        self.skip_idle = skip;
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn chem_field(&self) -> Option<&ChemField> {
        self.chem.as_ref()
    }

    fn check_population(&self) -> Result<()> {
        let n = self.state.total_mass();
        if n > self.model.n_max {
            return Err(Error::PopulationExplosion { population: n, limit: self.model.n_max, time: self.state.time() });
        }
        Ok(())
    }

    fn unary_weights(&self, channel: usize) -> Result<Weights> {
        let rates = &self.model.rates;
        let rate = if channel == REPAIR { &rates.repair } else { &rates.death };
        let xs = self.state.xs();
        let eval = |q: &Point, ex: Exclude| {
            if channel == REPAIR {
                rates.eval_r(q, &self.state, ex)
            } else {
                rates.eval_a(q, &self.state, ex)
            }
        };
        if xs.is_empty() {
            return Ok(Weights::Uniform { each: 0.0, candidates: 0 });
        }
        if rate.is_spatially_constant() {
            let each = eval(&xs[0], Exclude::One(0))?;
            return Ok(Weights::Uniform { each, candidates: xs.len() });
        }
        let weights = xs.iter().enumerate().map(|(i, q)| eval(q, Exclude::One(i))).collect::<Result<Vec<_>>>()?;
        let total = weights.iter().sum();
        Ok(Weights::Explicit { weights, total })
    }

    fn pair_row(&self, snap: &SystemState, i: usize, out: &mut Vec<f64>) -> Result<()> {
        let xs = snap.xs();
        let qi = xs[i];
        out.clear();
        for (j, qj) in xs.iter().enumerate().skip(i + 1) {
            let d2 = qi.dist_sq(qj);
            if d2 == 0.0 {
                return Err(Error::DegeneratePair(qi));
            }
            out.push(self.model.rates.pair_rate_sq(&qi, qj, d2, snap, Exclude::Two(i, j))?);
        }
        Ok(())
    }

    fn pair_weights(&mut self) -> Result<Weights> {
        let n = self.state.xs().len();
        if n < 2 {
            return Ok(Weights::Uniform { each: 0.0, candidates: 0 });
        }
        let rates = &self.model.rates;
        if rates.pair.is_spatially_constant() {
            let xs = self.state.xs();
            let each = rates.pair_rate_sq(&xs[0], &xs[1], 0.0, &self.state, Exclude::Two(0, 1))?;
            return Ok(Weights::Uniform { each, candidates: n * (n - 1) / 2 });
        }
        let snap = self.state.clone();
        let mut rows = Vec::with_capacity(n);
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            self.pair_row(&snap, i, &mut row)?;
            rows.push(row.iter().sum::<f64>());
        }
        let total = rows.iter().sum();
        self.snapshot = Some(snap);
        Ok(Weights::Rows { rows, total })
    }

    fn select_unary(&mut self, w: &Weights, name: &'static str) -> Result<usize> {
        let u: f64 = self.streams.jump.random();
        match w {
            Weights::Uniform { each, candidates } => {
                if !(*each > 0.0) || *candidates == 0 {
                    return Err(Error::StaleTotals(name));
                }
                Ok(((u * *candidates as f64) as usize).min(candidates - 1))
            }
            Weights::Explicit { weights, total } => pick(weights, *total, u, name),
            Weights::Rows { .. } => unreachable!("rows are only used for pairs"),
        }
    }

    fn select_pair(&mut self, w: &Weights) -> Result<(usize, usize)> {
        match w {
            Weights::Uniform { each, .. } => {
                let n = self.state.xs().len();
                if !(*each > 0.0) || n < 2 {
                    return Err(Error::StaleTotals("pair"));
                }
                let i = ((self.streams.jump.random::<f64>() * n as f64) as usize).min(n - 1);
                let mut j = ((self.streams.jump.random::<f64>() * (n - 1) as f64) as usize).min(n - 2);
                if j >= i {
                    j += 1;
                }
                Ok((i, j))
            }
            Weights::Rows { rows, total } => {
                let u: f64 = self.streams.jump.random();
                let i = pick(rows, *total, u, "pair")?;
                let snap = self.snapshot.take().ok_or(Error::StaleTotals("pair"))?;
                let mut row = Vec::new();
                self.pair_row(&snap, i, &mut row)?;
                let row_total: f64 = row.iter().sum();
                let v: f64 = self.streams.jump.random();
                let k = pick(&row, row_total, v, "pair")?;
                Ok((i, i + 1 + k))
            }
            Weights::Explicit { .. } => unreachable!("pairs use rows"),
        }
    }

    fn execute(&mut self, channel: usize, weights: &Weights) -> Result<EventRecord> {
        let model = self.model;
        let time = self.state.time();
        let replicate = self.replicate;
        let record = |channel, removed, created| EventRecord { replicate, time, channel, removed, created };
        match channel {
            REPAIR => {
                let i = self.select_unary(weights, "repair")?;
                let q = self.state.remove_x(i);
                self.state.counts_mut().repair += 1;
                Ok(record(Channel::Repair, vec![q], vec![]))
            }
            DEATH => {
                let i = self.select_unary(weights, "death")?;
                let q = self.state.remove_x(i);
                let y = model.rates.death_placement.sample(&model.domain, &[q], &mut self.streams.jump)?;
                self.state.push_y(y);
                self.state.counts_mut().death += 1;
                Ok(record(Channel::Death, vec![q], vec![(LesionType::Y, y)]))
            }
            PAIR => {
                let (i, j) = self.select_pair(weights)?;
                let (q1, q2) = (self.state.xs()[i], self.state.xs()[j]);
                let lethal = self.streams.jump.random::<f64>() < model.rates.eval_p(&q1, &q2);
                self.state.remove_x_pair(i, j);
                if lethal {
                    let y = model.rates.pair_placement.sample(&model.domain, &[q1, q2], &mut self.streams.jump)?;
                    self.state.push_y(y);
                    self.state.counts_mut().pair_lethal += 1;
                    Ok(record(Channel::PairLethal, vec![q1, q2], vec![(LesionType::Y, y)]))
                } else {
                    self.state.counts_mut().pair_repair += 1;
                    Ok(record(Channel::PairRepair, vec![q1, q2], vec![]))
                }
            }
            IRRADIATION => {
                let irr = model.irradiation.as_ref().ok_or(Error::StaleTotals("irradiation"))?;
                let chem = model.chemistry.as_ref().zip(self.chem.as_ref());
                let batch = irr.sample_batch(&model.domain, chem, &mut self.streams.irradiation)?;
                if let (Some(solver), Some(field)) = (model.chemistry.as_ref(), self.chem.as_mut()) {
                    if !solver.model().footprint_yield.is_empty() {
                        let shape = irr.footprint_shape(&batch.center, solver.grid());
                        solver.inject(field, &solver.event_footprint(&shape, batch.z))?;
                    }
                }
                let mut created = Vec::with_capacity(batch.xs.len() + batch.ys.len());
                for q in batch.xs {
                    self.state.push_x(q);
                    created.push((LesionType::X, q));
                }
                for q in batch.ys {
                    self.state.push_y(q);
                    created.push((LesionType::Y, q));
                }
                self.state.counts_mut().irradiation += 1;
                self.check_population()?;
                Ok(record(Channel::Irradiation, vec![], created))
            }
            _ => unreachable!("unknown channel {channel}"),
        }
    }

    /// Moves every lesion and the chemistry clock forward by `dt`, landing
    /// exactly on `t_end`.
    fn advance(&mut self, dt: f64, t_end: f64) -> Result<()> {
        if dt > 0.0 && !self.model.motion.is_frozen() {
            let motion = &self.model.motion;
            let mut remaining = dt;
            while remaining > 0.0 {
                let h = remaining.min(motion.dt_diff);
                motion.step_all(&mut self.state, &self.model.domain, h, &mut self.streams.diffusion)?;
                remaining -= h;
            }
        }
        self.state.set_time(t_end);
        if let (Some(solver), Some(field)) = (self.model.chemistry.as_ref(), self.chem.as_mut()) {
            solver.advance(field, t_end - field.time)?;
        }
        Ok(())
    }

    /// Runs until the next event or `t_max`, whichever comes first.
    pub fn next_event(&mut self, t_max: f64) -> Result<Option<EventRecord>> {
        let t0 = self.state.time();
        if !(t_max >= t0) {
            return Err(Error::Input(format!("t_max {t_max} precedes the state time {t0}")));
        }
        let frozen = self.model.motion.is_frozen();
        loop {
            let t = self.state.time();
            if t >= t_max {
                return Ok(None);
            }
            let weights = [self.unary_weights(REPAIR)?, self.unary_weights(DEATH)?, self.pair_weights()?];
            let mut totals = [weights[0].total(), weights[1].total(), weights[2].total(), self.model.irradiation_rate(t)];
            for (k, v) in totals.iter().enumerate() {
                if !(v.is_finite() && *v >= 0.0) {
                    let name = ["r", "a", "b", "d_dot"][k];
                    return Err(Error::InvalidRate { name, value: *v });
                }
            }
            let mut end = t_max;
            if let Some(s) = self.model.irradiation_switch(t) {
                end = end.min(s);
            }
            let idle = totals.iter().all(|v| *v == 0.0);
            let positions_irrelevant = self.state.xs().is_empty() || self.model.rates.is_spatially_constant();
            if !frozen && !(idle && positions_irrelevant && self.skip_idle) {
                end = end.min(t + self.model.motion.dt_diff);
            }
            let h = end - t;
            // earliest clock inside the substep; ties go to the lower channel
            let mut fire: Option<(usize, f64)> = None;
            for (k, rate) in totals.iter().enumerate() {
                if *rate > 0.0 {
                    let tau = self.clocks[k] / rate;
                    if tau < h && fire.is_none_or(|(_, best)| tau < best) {
                        fire = Some((k, tau));
                    }
                }
            }
            let dt = fire.map_or(h, |(_, tau)| tau);
            let t_next = if fire.is_some() { t + dt } else { end };
            if idle && positions_irrelevant && self.skip_idle {
                self.state.set_time(t_next);
                if let (Some(solver), Some(field)) = (self.model.chemistry.as_ref(), self.chem.as_mut()) {
                    solver.advance(field, t_next - field.time)?;
                }
            } else {
                self.advance(dt, t_next)?;
            }
            for (c, rate) in self.clocks.iter_mut().zip(totals.iter_mut()) {
                *c = (*c - *rate * dt).max(0.0);
            }
            if let Some((k, _)) = fire {
                self.clocks[k] = self.streams.jump.sample(Exp1);
                let w = if k < 3 { weights[k].clone() } else { Weights::Uniform { each: 0.0, candidates: 0 } };
                let rec = self.execute(k, &w)?;
                self.snapshot = None;
                return Ok(Some(rec));
            }
        }
    }

    /// Runs to `t_max`, handing every event to `sink`.
    pub fn run_until(&mut self, t_max: f64, mut sink: impl FnMut(EventRecord)) -> Result<()> {
        while let Some(ev) = self.next_event(t_max)? {
            sink(ev);
        }
        Ok(())
    }

    pub fn into_state(self) -> SystemState {
        self.state
    }
}

/// Full path of one replicate on `[0, max(observe.times)]`.
pub fn simulate_replicate(
    model: &Model,
    initial: &InitialCondition,
    master_seed: u64,
    replicate: u64,
    observe: &Observe,
) -> Result<Trajectory> {
    let mut sim = Simulation::from_initial(model, initial, master_seed, replicate)?;
    sim.set_skip_idle(!observe.snapshots);
    let initial_counts = sim.state().marginal_counts();
    let mut traj = Trajectory {
        replicate,
        initial_counts,
        counts: Vec::with_capacity(observe.times.len()),
        events: Vec::new(),
        snapshots: Vec::new(),
        chemistry: Vec::new(),
        final_state: SystemState::empty(model.domain.dim()),
    };
    for &t in &observe.times {
        if t < sim.state().time() {
            return Err(Error::Input("observation times must be ascending and non-negative".into()));
        }
        sim.run_until(t, |ev| {
            if observe.events {
                traj.events.push(ev);
            }
        })?;
        let (nx, ny) = sim.state().marginal_counts();
        traj.counts.push((t, nx, ny));
        if observe.snapshots {
            traj.snapshots.push(sim.state().clone());
            if let Some(field) = sim.chem_field() {
                traj.chemistry.push(field.clone());
            }
        }
    }
    traj.final_state = sim.into_state();
    Ok(traj)
}
