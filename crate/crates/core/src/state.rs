//! The two-type point measure `nu = (nu^X, nu^Y)`.
//!
//! Positions are stored as one flat array per type. Ordering inside an array
//! carries no meaning; every observable below is permutation invariant.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::grid::Grid;
use crate::rates::Kernel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LesionType {
    X,
    Y,
}

impl fmt::Display for LesionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LesionType::X => "X",
            LesionType::Y => "Y",
        })
    }
}

/// Focal X lesions left out of a concentration sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exclude {
    None,
    One(usize),
    Two(usize, usize),
}

impl Exclude {
    #[inline]
    fn skips(self, i: usize) -> bool {
        match self {
            Exclude::None => false,
            Exclude::One(a) => i == a,
            Exclude::Two(a, b) => i == a || i == b,
        }
    }
}

/// Per-channel event tally.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub repair: u64,
    pub death: u64,
    pub pair_lethal: u64,
    pub pair_repair: u64,
    pub irradiation: u64,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.repair + self.death + self.pair_lethal + self.pair_repair + self.irradiation
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    time: f64,
    dim: usize,
    xs: Vec<Point>,
    ys: Vec<Point>,
    counts: EventCounts,
}

impl SystemState {
    pub fn new(time: f64, xs: Vec<Point>, ys: Vec<Point>) -> Result<Self> {
        let dim = xs.first().or(ys.first()).map_or(2, Point::dim);
        Self::with_dim(dim, time, xs, ys)
    }

    pub fn with_dim(dim: usize, time: f64, xs: Vec<Point>, ys: Vec<Point>) -> Result<Self> {
        if let Some(q) = xs.iter().chain(&ys).find(|q| q.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: q.dim() });
        }
        if !time.is_finite() {
            return Err(Error::Input(format!("state time {time} is not finite")));
        }
        Ok(Self { time, dim, xs, ys, counts: EventCounts::default() })
    }

    pub fn empty(dim: usize) -> Self {
        Self { time: 0.0, dim, xs: Vec::new(), ys: Vec::new(), counts: EventCounts::default() }
    }

    /// Errors unless every lesion lies in the closed domain.
    pub fn check_in(&self, domain: &Domain) -> Result<()> {
        for q in self.xs.iter().chain(&self.ys) {
            if !domain.contains(q)? {
                return Err(Error::Input(format!("lesion at {q:?} lies outside the domain")));
            }
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn xs(&self) -> &[Point] {
        &self.xs
    }

    pub fn ys(&self) -> &[Point] {
        &self.ys
    }

    pub fn event_counts(&self) -> &EventCounts {
        &self.counts
    }

    /// `(N^X, N^Y)`
    pub fn marginal_counts(&self) -> (usize, usize) {
        (self.xs.len(), self.ys.len())
    }

    /// `<1, nu> = N^X + N^Y`
    pub fn total_mass(&self) -> usize {
        self.xs.len() + self.ys.len()
    }

    /// Every lesion with its type, X first.
    pub fn lesions(&self) -> impl Iterator<Item = (LesionType, &Point)> {
        self.xs
            .iter()
            .map(|q| (LesionType::X, q))
            .chain(self.ys.iter().map(|q| (LesionType::Y, q)))
    }

    /// `<Gamma_q, nu>` over all lesions admitted by the kernel's type filter.
    pub fn kernel_mass(&self, q: &Point, kernel: &Kernel) -> f64 {
        self.kernel_mass_excluding(q, kernel, Exclude::None)
    }

    /// `<Gamma_q, nu>` with the focal X lesion(s) removed.
    pub fn kernel_mass_excluding(&self, q: &Point, kernel: &Kernel, exclude: Exclude) -> f64 {
        let mut acc = 0.0;
        if kernel.filter.includes(LesionType::X) {
            if kernel.is_constant() {
                let skipped = match exclude {
                    Exclude::None => 0,
                    Exclude::One(i) => usize::from(i < self.xs.len()),
                    Exclude::Two(i, j) => usize::from(i < self.xs.len()) + usize::from(j < self.xs.len() && j != i),
                };
                acc += kernel.sup() * (self.xs.len() - skipped) as f64;
            } else {
                for (i, p) in self.xs.iter().enumerate() {
                    if !exclude.skips(i) {
                        acc += kernel.eval_sq(q.dist_sq(p));
                    }
                }
            }
        }
        if kernel.filter.includes(LesionType::Y) {
            if kernel.is_constant() {
                acc += kernel.sup() * self.ys.len() as f64;
            } else {
                acc += self.ys.iter().map(|p| kernel.eval_sq(q.dist_sq(p))).sum::<f64>();
            }
        }
        acc
    }

    /// Rescaled histograms `(u^X, u^Y)`: cell value = count / (K * cell volume).
    pub fn empirical_measure(&self, scale: f64, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
        let w = 1.0 / (scale * grid.cell_volume());
        let hist = |pts: &[Point]| {
            let mut f = vec![0.0; grid.len()];
            for q in pts {
                f[grid.locate(q)] += w;
            }
            f
        };
        (hist(&self.xs), hist(&self.ys))
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub(crate) fn positions_mut(&mut self) -> (&mut [Point], &mut [Point]) {
        (&mut self.xs, &mut self.ys)
    }

    pub(crate) fn counts_mut(&mut self) -> &mut EventCounts {
        &mut self.counts
    }

    /// Removes X lesion `i`; the last X takes its slot.
    pub(crate) fn remove_x(&mut self, i: usize) -> Point {
        self.xs.swap_remove(i)
    }

    /// Removes two distinct X lesions.
    pub(crate) fn remove_x_pair(&mut self, i: usize, j: usize) -> (Point, Point) {
        debug_assert_ne!(i, j);
        let (hi, lo) = if i > j { (i, j) } else { (j, i) };
        let q_hi = self.xs.swap_remove(hi);
        let q_lo = self.xs.swap_remove(lo);
        if i > j {
            (q_hi, q_lo)
        } else {
            (q_lo, q_hi)
        }
    }

    pub(crate) fn push_x(&mut self, q: Point) {
        self.xs.push(q);
    }

    pub(crate) fn push_y(&mut self, q: Point) {
        self.ys.push(q);
    }
}
