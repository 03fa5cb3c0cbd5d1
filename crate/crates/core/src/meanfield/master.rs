//! Master equation for the law `p(t, y, x)` of the lesion counts.
//!
//! Transitions out of `(x, y)`:
//! repair `x r -> (x-1, y)`, death `x a -> (x-1, y+1)`, pair
//! `c(x) b -> (x-2, y+1)` with probability `p` and `(x-2, y)` otherwise, where
//! `c(x)` follows the [`PairConvention`].

use serde::{Deserialize, Serialize};

use super::{rk4_step, ScalarRates};
use crate::error::{Error, Result};

pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-8;

/// Law of `(X(0), Y(0))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    Fixed { x0: u64, #[serde(default)] y0: u64 },
    /// `X(0) ~ Poisson(mean_x)`, `Y(0) = y0`.
    Poisson { mean_x: f64, #[serde(default)] y0: u64 },
    /// Explicit `(x, y, probability)` entries.
    Table { entries: Vec<(u64, u64, f64)> },
}

impl InitialLaw {
    /// Entries inside `x <= x_max` plus the mass left outside.
    fn discretize(&self, x_max: u64) -> (Vec<(u64, u64, f64)>, f64) {
        match self {
            InitialLaw::Fixed { x0, y0 } => (vec![(*x0, *y0, 1.0)], 0.0),
            InitialLaw::Poisson { mean_x, y0 } => {
                let mut entries = Vec::new();
                let mut pk = (-mean_x).exp();
                let mut inside = 0.0;
                for k in 0..=x_max {
                    if k > 0 {
                        pk *= mean_x / k as f64;
                    }
                    entries.push((k, *y0, pk));
                    inside += pk;
                }
                (entries, (1.0 - inside).max(0.0))
            }
            InitialLaw::Table { entries } => {
                let total: f64 = entries.iter().map(|e| e.2).sum();
                let kept: Vec<_> = entries.iter().copied().filter(|e| e.0 <= x_max).collect();
                let inside: f64 = kept.iter().map(|e| e.2).sum();
                (kept, (total - inside).max(0.0))
            }
        }
    }

    fn x_support(&self) -> u64 {
        match self {
            InitialLaw::Fixed { x0, .. } => *x0,
            InitialLaw::Poisson { mean_x, .. } => (mean_x + 10.0 * mean_x.sqrt()).ceil() as u64 + 10,
            InitialLaw::Table { entries } => entries.iter().map(|e| e.0).max().unwrap_or(0),
        }
    }

    fn y_support(&self) -> u64 {
        match self {
            InitialLaw::Fixed { y0, .. } | InitialLaw::Poisson { y0, .. } => *y0,
            InitialLaw::Table { entries } => entries.iter().map(|e| e.1).max().unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialLaw::Poisson { mean_x, .. } if !(mean_x.is_finite() && *mean_x >= 0.0) => {
                Err(Error::Config("poisson initial mean must be >= 0".into()))
            }
            InitialLaw::Table { entries } => {
                let total: f64 = entries.iter().map(|e| e.2).sum();
                if entries.iter().any(|e| !(e.2 >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    Err(Error::Config("initial table probabilities must be >= 0 and sum to 1".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MasterSolution {
    pub times: Vec<f64>,
    /// `S(t) = sum_x p(t, 0, x)`
    pub survival: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    /// `E[X (X - 1)]`
    pub factorial_x: Vec<f64>,
    /// Total probability kept on the lattice.
    pub mass: Vec<f64>,
    /// Probability lost through truncation (initial and dynamic).
    pub leak: f64,
    pub x_max: u64,
    pub y_max: u64,
    /// `p(T, y, x)` at the last time, row-major in `y`.
    pub final_table: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MasterSolver {
    pub rates: ScalarRates,
    pub dt: f64,
    pub tolerance: f64,
}

struct Lattice {
    nx: usize,
    ny: usize,
}

impl Lattice {
    #[inline]
    fn idx(&self, x: usize, y: usize) -> usize {
        y * self.nx + x
    }
}

impl MasterSolver {
    pub fn new(rates: ScalarRates, dt: f64) -> Self {
        Self { rates, dt, tolerance: DEFAULT_TRUNCATION_TOLERANCE }
    }

    /// Solves with automatic truncation; the X bound is doubled while the
    /// leak exceeds the tolerance.
    pub fn solve(&self, init: &InitialLaw, times: &[f64]) -> Result<MasterSolution> {
        self.rates.validate()?;
        init.validate()?;
        if !(self.dt > 0.0) {
            return Err(Error::Config("master dt must be positive".into()));
        }
        let mut x_max = init.x_support();
        for _ in 0..6 {
            let sol = self.solve_truncated(init, times, x_max)?;
            if sol.leak <= self.tolerance {
                return Ok(sol);
            }
            x_max *= 2;
        }
        let sol = self.solve_truncated(init, times, x_max)?;
        Err(Error::Truncation { leak: sol.leak, tolerance: self.tolerance })
    }

    pub fn solve_truncated(&self, init: &InitialLaw, times: &[f64], x_max: u64) -> Result<MasterSolution> {
        let (entries, initial_leak) = init.discretize(x_max);
        // every X yields at most one Y
        let y_max = init.y_support() + x_max;
        let lat = Lattice { nx: x_max as usize + 1, ny: y_max as usize + 1 };
        let mut p = vec![0.0; lat.nx * lat.ny];
        for (x, y, w) in entries {
            p[lat.idx(x as usize, y as usize)] += w;
        }
        let ScalarRates { r, a, b, p: pl, convention } = self.rates;
        let pair = |x: usize| convention.intensity(b, x as u64);
        let out_rate = |x: usize| x as f64 * (r + a) + pair(x);
        let lambda_max = (0..lat.nx).map(out_rate).fold(0.0, f64::max);
        let dt = if lambda_max > 0.0 { self.dt.min(1.0 / lambda_max) } else { self.dt };

        let mut rhs = |_t: f64, p: &[f64], dp: &mut [f64]| {
            dp.iter_mut().for_each(|v| *v = 0.0);
            for y in 0..lat.ny {
                for x in 1..lat.nx {
                    let v = p[lat.idx(x, y)];
                    if v == 0.0 {
                        continue;
                    }
                    let xf = x as f64;
                    dp[lat.idx(x, y)] -= out_rate(x) * v;
                    dp[lat.idx(x - 1, y)] += xf * r * v;
                    if y + 1 < lat.ny {
                        dp[lat.idx(x - 1, y + 1)] += xf * a * v;
                    }
                    if x >= 2 {
                        let c = pair(x) * v;
                        dp[lat.idx(x - 2, y)] += (1.0 - pl) * c;
                        if y + 1 < lat.ny {
                            dp[lat.idx(x - 2, y + 1)] += pl * c;
                        }
                    }
                }
            }
        };

        let mut sol = MasterSolution {
            times: times.to_vec(),
            survival: Vec::new(),
            mean_x: Vec::new(),
            mean_y: Vec::new(),
            factorial_x: Vec::new(),
            mass: Vec::new(),
            leak: initial_leak,
            x_max,
            y_max,
            final_table: Vec::new(),
        };
        let mut t = 0.0;
        for &target in times {
            if target < t {
                return Err(Error::Input("master output times must be ascending".into()));
            }
            while target - t > 1e-14 * target.max(1.0) {
                let h = dt.min(target - t);
                rk4_step(t, &mut p, h, &mut rhs);
                t += h;
            }
            t = t.max(target);
            let (mut s, mut mx, mut my, mut fx, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for y in 0..lat.ny {
                for x in 0..lat.nx {
                    let v = p[lat.idx(x, y)];
                    m += v;
                    mx += x as f64 * v;
                    my += y as f64 * v;
                    fx += (x * x.saturating_sub(1)) as f64 * v;
                    if y == 0 {
                        s += v;
                    }
                }
            }
            sol.survival.push(s);
            sol.mean_x.push(mx);
            sol.mean_y.push(my);
            sol.factorial_x.push(fx);
            sol.mass.push(m);
        }
        let final_mass = sol.mass.last().copied().unwrap_or(1.0 - initial_leak);
        sol.leak = (1.0 - final_mass).max(initial_leak);
        sol.final_table = p;
        Ok(sol)
    }

    /// `lim_{t -> inf} S(t)` from the absorbing jump chain, for a fixed start.
    pub fn asymptotic_survival(&self, x0: u64) -> f64 {
        // S(x) = [x r S(x-1) + c(x) b (1-p) S(x-2)] / (x (r+a) + c(x) b)
        let ScalarRates { r, a, b, p, convention } = self.rates;
        let mut s = vec![1.0; x0 as usize + 1];
        for x in 1..=x0 as usize {
            let c = convention.intensity(b, x as u64);
            let total = x as f64 * (r + a) + c;
            if total == 0.0 {
                s[x] = 1.0;
                continue;
            }
            let two_down = if x >= 2 { s[x - 2] } else { 0.0 };
            s[x] = (x as f64 * r * s[x - 1] + c * (1.0 - p) * two_down) / total;
        }
        s[x0 as usize]
    }
}
