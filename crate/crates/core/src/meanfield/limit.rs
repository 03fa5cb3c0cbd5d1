//! Large-population limit equations for the rescaled densities `u^X`, `u^Y`.
//!
//! With the pair intensity factor `c` of the chosen [`PairConvention`]:
//!
//! ```text
//! u^X' = L*_X u^X - (r + a) u^X - 2c u^X (B * u^X) + s_X
//! u^Y' = L*_Y u^Y + a u^X + c p (b-weighted pair creation) + s_Y
//! ```
//!
//! The homogeneous solver works on totals; the spatial solver uses the
//! method of lines on a [`Grid`] with RK4 in time.

use crate::diffusion::{Drift, MotionModel};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::grid::Grid;
use crate::irradiation::{IrradiationModel, TrackPlacement};
use crate::rates::{check_rate, Kernel, Placement, RateModel, Response};
use crate::chemistry::NEGATIVITY_TOLERANCE;
use crate::state::LesionType;

use super::{integrate, PairConvention, ScalarRates};

/// Spatially constant limit: ODEs for the totals `(U^X, U^Y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogeneousLimit {
    pub rates: ScalarRates,
    /// Source of X per unit time while `t < t_irr`.
    pub source_x: f64,
    pub source_y: f64,
    pub t_irr: f64,
}

impl HomogeneousLimit {
    pub fn new(rates: ScalarRates) -> Self {
        Self { rates, source_x: 0.0, source_y: 0.0, t_irr: 0.0 }
    }

    /// Source `d_dot * E[xi]` from an irradiation model.
    pub fn with_irradiation(mut self, irr: &IrradiationModel) -> Self {
        let (ex, ey) = irr.mean_yields();
        self.source_x = irr.d_dot * ex;
        self.source_y = irr.d_dot * ey;
        self.t_irr = irr.t_irr;
        self
    }

    /// `(t, U^X, U^Y)` at each of the ascending `times`.
    pub fn solve(&self, u0x: f64, u0y: f64, times: &[f64], dt: f64) -> Result<Vec<(f64, f64, f64)>> {
        self.rates.validate()?;
        if !(dt > 0.0) || u0x < 0.0 || u0y < 0.0 {
            return Err(Error::Config("limit solver needs dt > 0 and non-negative initial totals".into()));
        }
        let ScalarRates { r, a, b, p, convention } = self.rates;
        let c = convention.limit_factor();
        let (sx, sy, t_irr) = (self.source_x, self.source_y, self.t_irr);
        let sol = integrate(vec![u0x, u0y], times, &[t_irr], dt, |_, step, u, du| {
            let on = if step < t_irr { 1.0 } else { 0.0 };
            let x = u[0];
            du[0] = -(r + a) * x - 2.0 * c * b * x * x + on * sx;
            du[1] = a * x + c * p * b * x * x + on * sy;
        });
        let out: Vec<(f64, f64, f64)> = times.iter().zip(sol).map(|(t, u)| (*t, u[0], u[1])).collect();
        if out.iter().any(|(_, x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Numerical("homogeneous limit diverged".into()));
        }
        Ok(out)
    }
}

/// Densities on the active cells of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitField {
    pub time: f64,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

/// Cells receiving a created Y lesion, with weights summing to one.
type Spread = Vec<(usize, f64)>;

const SEGMENT_POINTS: usize = 8;

/// Method-of-lines solver for the spatial limit.
#[derive(Clone, Debug)]
pub struct SpatialLimit {
    grid: Grid,
    rates: RateModel,
    convention: PairConvention,
    diffusivity: [f64; 2],
    drift: [Vec<f64>; 2],
    source: [Vec<f64>; 2],
    t_irr: f64,
    dt: f64,
    /// `bbar(|c_i - c_j|)`, row-major
    pair_kernel: Vec<f64>,
    /// `p(c_i, c_j)`
    lethal: Vec<f64>,
    /// cell of the pair midpoint, for the density response
    midpoint_cell: Vec<usize>,
    spread: Vec<Spread>,
}

fn spread_for(grid: &Grid, placement: &Placement, q1: &Point, q2: &Point) -> Spread {
    let at = |alpha: f64| grid.locate(&q1.lerp(q2, alpha));
    match placement {
        Placement::AtParent => vec![(at(1.0), 0.5), (at(0.0), 0.5)],
        Placement::Midpoint => vec![(at(0.5), 1.0)],
        Placement::SegmentMixture { weights, alphas } => weights.iter().zip(alphas).map(|(w, a)| (at(*a), *w)).collect(),
        Placement::SegmentUniform => {
            let w = 1.0 / SEGMENT_POINTS as f64;
            (0..SEGMENT_POINTS).map(|k| (at((k as f64 + 0.5) * w), w)).collect()
        }
    }
}

fn motion_coefficients(motion: &MotionModel, dim: usize) -> Result<([f64; 2], [Vec<f64>; 2])> {
    let mut diff = [0.0; 2];
    let mut drift = [vec![0.0; dim], vec![0.0; dim]];
    for (k, m) in [&motion.x, &motion.y].into_iter().enumerate() {
        let sigma = m
            .scalar_sigma()
            .ok_or_else(|| Error::Config("spatial limit supports scalar sigma only".into()))?;
        diff[k] = 0.5 * sigma * sigma;
        if matches!(m.drift, Drift::Relax { .. }) {
            return Err(Error::Config("spatial limit supports constant drift only".into()));
        }
        drift[k] = m.constant_drift(dim).unwrap_or_else(|| vec![0.0; dim]);
    }
    Ok((diff, drift))
}

impl SpatialLimit {
    /// Builds the solver. `irradiation` contributes a protracted source
    /// `d_dot E[xi]` distributed by the track footprint.
    pub fn new(
        domain: &Domain,
        cells_per_axis: usize,
        rates: &RateModel,
        motion: &MotionModel,
        irradiation: Option<&IrradiationModel>,
        convention: PairConvention,
        dt: f64,
    ) -> Result<Self> {
        rates.validate()?;
        motion.validate(domain.dim())?;
        let grid = Grid::new(domain, cells_per_axis)?;
        let dim = grid.dim();
        let (diffusivity, drift) = motion_coefficients(motion, dim)?;
        let mut speed = 0.0f64;
        for k in 0..2 {
            let s: f64 = (0..dim).map(|ax| drift[k][ax].abs() / grid.spacing(ax)).sum();
            let d: f64 = (0..dim).map(|ax| 2.0 * diffusivity[k] / grid.spacing(ax).powi(2)).sum();
            speed = speed.max(s + d);
        }
        if !(dt > 0.0) || dt * speed > 1.0 {
            return Err(Error::Config(format!(
                "limit time step {dt} violates the stability bound {}",
                1.0 / speed
            )));
        }
        let n = grid.len();
        let centers = grid.centers();
        let mut pair_kernel = vec![0.0; n * n];
        let mut lethal = vec![0.0; n * n];
        let mut midpoint_cell = vec![0; n * n];
        let mut spread = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (ci, cj) = (&centers[i], &centers[j]);
                pair_kernel[i * n + j] = rates.pair.kernel.eval_sq(ci.dist_sq(cj));
                lethal[i * n + j] = rates.eval_p(ci, cj);
                midpoint_cell[i * n + j] = grid.locate(&ci.lerp(cj, 0.5));
                spread.push(spread_for(&grid, &rates.pair_placement, ci, cj));
            }
        }
        let mut source = [vec![0.0; n], vec![0.0; n]];
        let mut t_irr = 0.0;
        if let Some(irr) = irradiation {
            irr.validate(domain)?;
            let (ex, ey) = irr.mean_yields();
            let shape = match (&irr.tracks, &irr.radial) {
                (TrackPlacement::AtPoint { point }, Some(_)) => irr.footprint_shape(&Point::new(point)?, &grid),
                _ => vec![1.0 / grid.volume(); n],
            };
            source[0] = shape.iter().map(|s| irr.d_dot * ex * s).collect();
            source[1] = shape.iter().map(|s| irr.d_dot * ey * s).collect();
            t_irr = irr.t_irr;
        }
        Ok(Self {
            grid,
            rates: rates.clone(),
            convention,
            diffusivity,
            drift,
            source,
            t_irr,
            dt,
            pair_kernel,
            lethal,
            midpoint_cell,
            spread,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Uniform densities with the given totals.
    pub fn uniform_field(&self, total_x: f64, total_y: f64) -> LimitField {
        let v = self.grid.volume();
        let n = self.grid.len();
        LimitField { time: 0.0, ux: vec![total_x / v; n], uy: vec![total_y / v; n] }
    }

    /// Densities from a function of position.
    pub fn field_from(&self, fx: impl Fn(&Point) -> f64, fy: impl Fn(&Point) -> f64) -> LimitField {
        let c = self.grid.centers();
        LimitField { time: 0.0, ux: c.iter().map(&fx).collect(), uy: c.iter().map(&fy).collect() }
    }

    pub fn totals(&self, field: &LimitField) -> (f64, f64) {
        (self.grid.integrate(&field.ux), self.grid.integrate(&field.uy))
    }

    /// `<Gamma_{c_i}, u>` for every cell.
    fn concentration(&self, kernel: &Kernel, ux: &[f64], uy: &[f64]) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        let cx = kernel.filter.includes(LesionType::X);
        let cy = kernel.filter.includes(LesionType::Y);
        let mass: Vec<f64> = ux
            .iter()
            .zip(uy)
            .map(|(x, y)| (if cx { *x } else { 0.0 } + if cy { *y } else { 0.0 }) * vol)
            .collect();
        let centers = self.grid.centers();
        if kernel.is_constant() {
            let v = kernel.eval_sq(0.0) * mass.iter().sum::<f64>();
            return vec![v; centers.len()];
        }
        centers
            .iter()
            .map(|q| centers.iter().zip(&mass).map(|(c, m)| kernel.eval_sq(q.dist_sq(c)) * m).sum())
            .collect()
    }

    fn unary_rates(&self, name: &'static str, rate: &crate::rates::UnaryRate, ux: &[f64], uy: &[f64]) -> Result<Vec<f64>> {
        let n = ux.len();
        if rate.response == Response::Constant {
            let v = check_rate(name, rate.base, rate.cap)?;
            return Ok(vec![v; n]);
        }
        self.concentration(&rate.kernel, ux, uy)
            .into_iter()
            .map(|v| check_rate(name, rate.base * rate.response.eval(v), rate.cap))
            .collect()
    }

    fn transport(&self, k: usize, u: &[f64], du: &mut [f64]) {
        let g = &self.grid;
        let d = self.diffusivity[k];
        let dim = g.dim();
        for i in 0..u.len() {
            let mut acc = if d > 0.0 { d * g.laplacian(u, i) } else { 0.0 };
            for ax in 0..dim {
                let mu = self.drift[k][ax];
                if mu == 0.0 {
                    continue;
                }
                let h = g.spacing(ax);
                // upwind fluxes through the two faces; none across the boundary
                let flux_up = g.neighbor(i, ax, true).map_or(0.0, |j| if mu > 0.0 { mu * u[i] } else { mu * u[j] });
                let flux_dn = g.neighbor(i, ax, false).map_or(0.0, |j| if mu > 0.0 { mu * u[j] } else { mu * u[i] });
                acc -= (flux_up - flux_dn) / h;
            }
            du[i] = acc;
        }
    }

    fn rhs(&self, step_start: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.grid.len();
        let vol = self.grid.cell_volume();
        let (ux, uy) = y.split_at(n);
        let (dx, dyy) = dy.split_at_mut(n);
        self.transport(0, ux, dx);
        self.transport(1, uy, dyy);
        let r = self.unary_rates("r", &self.rates.repair, ux, uy)?;
        let a = self.unary_rates("a", &self.rates.death, ux, uy)?;
        for i in 0..n {
            dx[i] -= (r[i] + a[i]) * ux[i];
            dyy[i] += a[i] * ux[i];
        }
        let pair = &self.rates.pair;
        let density = match (&pair.density_kernel, pair.response) {
            (Some(k), resp) if resp != Response::Constant => Some(self.concentration(k, ux, uy)),
            _ => None,
        };
        let c = self.convention.limit_factor();
        for i in 0..n {
            if ux[i] == 0.0 {
                continue;
            }
            let mut conv = 0.0;
            for j in 0..n {
                let bbar = self.pair_kernel[i * n + j];
                if bbar == 0.0 || ux[j] == 0.0 {
                    continue;
                }
                let g = density.as_ref().map_or(1.0, |v| pair.response.eval(v[self.midpoint_cell[i * n + j]]));
                let b = check_rate("b", bbar * g, pair.cap)?;
                let w = b * ux[j] * vol;
                conv += w;
                let created = c * self.lethal[i * n + j] * ux[i] * w;
                if created != 0.0 {
                    for &(cell, frac) in &self.spread[i * n + j] {
                        dyy[cell] += created * frac;
                    }
                }
            }
            dx[i] -= 2.0 * c * ux[i] * conv;
        }
        if step_start < self.t_irr {
            for i in 0..n {
                dx[i] += self.source[0][i];
                dyy[i] += self.source[1][i];
            }
        }
        Ok(())
    }

    /// Field at each of the ascending `times`.
    pub fn solve(&self, initial: &LimitField, times: &[f64]) -> Result<Vec<LimitField>> {
        let n = self.grid.len();
        if initial.ux.len() != n || initial.uy.len() != n {
            return Err(Error::Input(format!("limit field must have {n} cells")));
        }
        if let Some(v) = initial.ux.iter().chain(&initial.uy).find(|v| !(**v >= 0.0)) {
            return Err(Error::Input(format!("initial density {v} is negative")));
        }
        let mut y0 = initial.ux.clone();
        y0.extend_from_slice(&initial.uy);
        let shifted: Vec<f64> = times.iter().map(|t| t - initial.time).collect();
        let breaks = [self.t_irr - initial.time];
        let mut failure = None;
        let sol = integrate(y0, &shifted, &breaks, self.dt, |_, step, y, dy| {
            if failure.is_none() {
                if let Err(e) = self.rhs(step + initial.time, y, dy) {
                    failure = Some(e);
                }
            }
            if failure.is_some() {
                dy.iter_mut().for_each(|d| *d = 0.0);
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let mut out = Vec::with_capacity(times.len());
        for (t, mut y) in times.iter().zip(sol) {
            for (cell, v) in y.iter_mut().enumerate() {
                if !v.is_finite() || *v < -NEGATIVITY_TOLERANCE {
                    return Err(Error::Negativity { cell: cell % n, value: *v });
                }
                *v = v.max(0.0);
            }
            let uy = y.split_off(n);
            out.push(LimitField { time: *t, ux: y, uy });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::KernelShape;

    fn homog(r: f64, a: f64, b: f64, convention: PairConvention) -> HomogeneousLimit {
        HomogeneousLimit::new(ScalarRates { r, a, b, p: 1.0, convention })
    }

    #[test]
    fn zero_stays_zero() {
        let out = homog(4.0, 0.1, 0.1, PairConvention::Unordered).solve(0.0, 0.0, &[1.0, 5.0], 1e-3).unwrap();
        assert!(out.iter().all(|(_, x, y)| *x == 0.0 && *y == 0.0));
    }

    #[test]
    fn linear_decay() {
        let out = homog(4.0, 0.1, 0.0, PairConvention::Unordered).solve(3.0, 0.0, &[0.5, 1.0], 1e-3).unwrap();
        for (t, x, _) in out {
            assert!((x - 3.0 * (-4.1 * t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn riccati_closed_form() {
        let b = 0.3;
        let out = homog(0.0, 0.0, b, PairConvention::Ordered).solve(5.0, 0.0, &[0.2, 1.0, 4.0], 1e-3).unwrap();
        for (t, x, y) in out {
            let exact = 5.0 / (1.0 + 2.0 * b * 5.0 * t);
            assert!((x - exact).abs() < 1e-9, "{x} vs {exact}");
            // one Y per two X lost
            assert!((y - (5.0 - x) / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn source_switches_off() {
        let mut h = homog(1.0, 0.0, 0.0, PairConvention::Unordered);
        h.source_x = 2.0;
        h.t_irr = 1.0;
        let out = h.solve(0.0, 0.0, &[1.0, 2.0], 1e-3).unwrap();
        let at1 = 2.0 * (1.0 - (-1.0f64).exp());
        assert!((out[0].1 - at1).abs() < 1e-9);
        assert!((out[1].1 - at1 * (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn uniform_spatial_matches_homogeneous() {
        let domain = Domain::unit_square();
        let rates = RateModel::constant(1.0, 0.5, 0.4, 0.7);
        let motion = MotionModel::isotropic(0.2, 0.1, 1e-2);
        let lim = SpatialLimit::new(&domain, 6, &rates, &motion, None, PairConvention::Unordered, 1e-3).unwrap();
        let times = [0.5, 1.0, 2.0];
        let fields = lim.solve(&lim.uniform_field(3.0, 0.5), &times).unwrap();
        let h = HomogeneousLimit::new(ScalarRates { r: 1.0, a: 0.5, b: 0.4, p: 0.7, convention: PairConvention::Unordered });
        let tot = h.solve(3.0, 0.5, &times, 1e-3).unwrap();
        for (f, (_, x, y)) in fields.iter().zip(tot) {
            let (sx, sy) = lim.totals(f);
            assert!((sx - x).abs() < 1e-9 && (sy - y).abs() < 1e-9, "{sx} {x} {sy} {y}");
        }
    }

    #[test]
    fn pure_diffusion_conserves_mass() {
        let domain = Domain::disk(Point::xy(0.0, 0.0), 1.0).unwrap();
        let rates = RateModel::constant(0.0, 0.0, 0.0, 1.0);
        let motion = MotionModel::isotropic(0.5, 0.3, 1e-2);
        let lim = SpatialLimit::new(&domain, 16, &rates, &motion, None, PairConvention::Unordered, 1e-3).unwrap();
        let init = lim.field_from(|q| (-10.0 * q.norm_sq()).exp(), |q| 1.0 + q.get(0));
        let (mx, my) = lim.totals(&init);
        let out = lim.solve(&init, &[0.5, 2.0]).unwrap();
        for f in &out {
            let (x, y) = lim.totals(f);
            assert!(((x - mx) / mx).abs() < 1e-10 && ((y - my) / my).abs() < 1e-10);
        }
        // and it actually spread
        assert!(out[1].ux.iter().cloned().fold(0.0, f64::max) < init.ux.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn separated_bumps_do_not_interact() {
        let domain = Domain::cuboid(Point::xy(0.0, 0.0), Point::xy(4.0, 1.0)).unwrap();
        let eps = 0.5;
        let mut rates = RateModel::constant(1.0, 0.2, 0.0, 1.0);
        let motion = MotionModel::frozen(1e-2);
        let bump = |q: &Point| {
            let l = (q.get(0) - 0.5).powi(2) + (q.get(1) - 0.5).powi(2);
            let r = (q.get(0) - 3.5).powi(2) + (q.get(1) - 0.5).powi(2);
            let f = |d2: f64| if d2 < 0.04 { (-20.0 * d2).exp() } else { 0.0 };
            f(l) + f(r)
        };
        let base = SpatialLimit::new(&domain, 20, &rates, &motion, None, PairConvention::Unordered, 1e-3).unwrap();
        let free = base.solve(&base.field_from(bump, |_| 0.0), &[1.0]).unwrap();
        rates.pair.kernel = Kernel::new(KernelShape::BallIndicator { weight: 5.0, epsilon: eps }).unwrap();
        // give each bump its own interaction scale within the kernel radius
        let inter = SpatialLimit::new(&domain, 20, &rates, &motion, None, PairConvention::Unordered, 1e-3).unwrap();
        let with = inter.solve(&inter.field_from(bump, |_| 0.0), &[1.0]).unwrap();
        // the bumps themselves interact, but only within their own support
        let (fx, _) = base.totals(&free[0]);
        let (wx, _) = inter.totals(&with[0]);
        assert!(wx < fx);
        // the far-apart halves evolve identically to a single isolated bump run
        let left = |q: &Point| if q.get(0) < 2.0 { bump(q) } else { 0.0 };
        let alone = inter.solve(&inter.field_from(left, |_| 0.0), &[1.0]).unwrap();
        let n = inter.grid().len();
        for i in 0..n {
            if inter.grid().centers()[i].get(0) < 2.0 {
                assert!((alone[0].ux[i] - with[0].ux[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stability_gate_rejects_large_steps() {
        let domain = Domain::unit_square();
        let rates = RateModel::constant(0.0, 0.0, 0.0, 1.0);
        let motion = MotionModel::isotropic(1.0, 1.0, 1e-2);
        let err = SpatialLimit::new(&domain, 50, &rates, &motion, None, PairConvention::Unordered, 1e-2).unwrap_err();
        assert!(err.is_config());
    }
}
