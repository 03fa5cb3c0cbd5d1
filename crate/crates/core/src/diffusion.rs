//! Reflected Euler-Maruyama motion of lesions between reactions.
//!
//! `q <- reflect(q + mu(q) dt + sigma(q) sqrt(dt) xi)` with independent
//! standard normal `xi` per lesion and coordinate.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::state::SystemState;

/// Diffusion coefficient: `s * I` or a constant `d x d` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Default for Sigma {
    fn default() -> Self {
        Sigma::Scalar(0.0)
    }
}

/// Drift field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Drift {
    Constant(Vec<f64>),
    /// `mu(q) = -rate * (q - center)`
    Relax { center: Vec<f64>, rate: f64 },
}

impl Default for Drift {
    fn default() -> Self {
        Drift::Constant(Vec::new())
    }
}

/// Motion law of one lesion type.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeMotion {
    #[serde(default)]
    pub sigma: Sigma,
    #[serde(default)]
    pub drift: Drift,
}

impl TypeMotion {
    pub fn isotropic(sigma: f64) -> Self {
        Self { sigma: Sigma::Scalar(sigma), drift: Drift::default() }
    }

    pub fn is_frozen(&self) -> bool {
        let still_sigma = match &self.sigma {
            Sigma::Scalar(s) => *s == 0.0,
            Sigma::Matrix(m) => m.iter().flatten().all(|v| *v == 0.0),
        };
        let still_drift = match &self.drift {
            Drift::Constant(v) => v.iter().all(|x| *x == 0.0),
            Drift::Relax { rate, .. } => *rate == 0.0,
        };
        still_sigma && still_drift
    }

    /// Scalar `s` when `sigma = s * I`.
    pub fn scalar_sigma(&self) -> Option<f64> {
        match self.sigma {
            Sigma::Scalar(s) => Some(s),
            Sigma::Matrix(_) => None,
        }
    }

    /// Constant drift vector, if the drift does not depend on position.
    pub fn constant_drift(&self, dim: usize) -> Option<Vec<f64>> {
        match &self.drift {
            Drift::Constant(v) if v.is_empty() => Some(vec![0.0; dim]),
            Drift::Constant(v) => Some(v.clone()),
            Drift::Relax { .. } => None,
        }
    }

    fn validate(&self, dim: usize, name: &str) -> Result<()> {
        match &self.sigma {
            Sigma::Scalar(s) if !(s.is_finite() && *s >= 0.0) => {
                return Err(Error::Config(format!("motion.{name}: sigma must be finite and >= 0")))
            }
            Sigma::Matrix(m) if m.len() != dim || m.iter().any(|row| row.len() != dim) => {
                return Err(Error::Config(format!("motion.{name}: sigma matrix must be {dim}x{dim}")))
            }
            Sigma::Matrix(m) if m.iter().flatten().any(|v| !v.is_finite()) => {
                return Err(Error::Config(format!("motion.{name}: sigma entries must be finite")))
            }
            _ => {}
        }
        match &self.drift {
            Drift::Constant(v) if !v.is_empty() && v.len() != dim => {
                Err(Error::Config(format!("motion.{name}: drift must have {dim} components")))
            }
            Drift::Relax { center, rate } if center.len() != dim || !rate.is_finite() => {
                Err(Error::Config(format!("motion.{name}: relax drift needs a {dim}-d center and finite rate")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    fn propose<R: Rng + ?Sized>(&self, q: &Point, dt: f64, rng: &mut R) -> Point {
        let dim = q.dim();
        let sq = dt.sqrt();
        let mut xi = [0.0f64; 3];
        for x in xi.iter_mut().take(dim) {
            *x = rng.sample(StandardNormal);
        }
        let mut out = *q;
        for k in 0..dim {
            let mu = match &self.drift {
                Drift::Constant(v) => v.get(k).copied().unwrap_or(0.0),
                Drift::Relax { center, rate } => -rate * (q.get(k) - center[k]),
            };
            let noise = match &self.sigma {
                Sigma::Scalar(s) => s * xi[k],
                Sigma::Matrix(m) => (0..dim).map(|j| m[k][j] * xi[j]).sum(),
            };
            out.set(k, q.get(k) + mu * dt + noise * sq);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionModel {
    #[serde(default)]
    pub x: TypeMotion,
    #[serde(default)]
    pub y: TypeMotion,
    /// Maximum Euler step and rate-freezing substep (hours).
    pub dt_diff: f64,
}

impl MotionModel {
    pub fn frozen(dt_diff: f64) -> Self {
        Self { x: TypeMotion::default(), y: TypeMotion::default(), dt_diff }
    }

    pub fn isotropic(sigma_x: f64, sigma_y: f64, dt_diff: f64) -> Self {
        Self { x: TypeMotion::isotropic(sigma_x), y: TypeMotion::isotropic(sigma_y), dt_diff }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.dt_diff > 0.0 && self.dt_diff.is_finite()) {
            return Err(Error::Config("motion.dt_diff must be positive".into()));
        }
        self.x.validate(dim, "x")?;
        self.y.validate(dim, "y")
    }

    pub fn is_frozen(&self) -> bool {
        self.x.is_frozen() && self.y.is_frozen()
    }

    /// One Euler-Maruyama step of length `dt` for every lesion; advances the
    /// state clock by `dt`.
    pub fn step_all<R: Rng + ?Sized>(&self, state: &mut SystemState, domain: &Domain, dt: f64, rng: &mut R) -> Result<()> {
        if dt < 0.0 || dt > self.dt_diff * (1.0 + 1e-12) {
            return Err(Error::Input(format!("diffusion step {dt} outside [0, dt_diff = {}]", self.dt_diff)));
        }
        if dt > 0.0 {
            let (xs, ys) = state.positions_mut();
            for (motion, pts) in [(&self.x, xs), (&self.y, ys)] {
                if motion.is_frozen() {
                    continue;
                }
                for q in pts.iter_mut() {
                    *q = domain.reflect(motion.propose(q, dt, rng))?;
                }
            }
        }
        state.set_time(state.time() + dt);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::{linear_fit, mean_var};

    #[test]
    fn frozen_dynamics_only_advance_time() {
        let dom = Domain::unit_square();
        let m = MotionModel::frozen(0.1);
        let mut s = SystemState::new(0.0, vec![Point::xy(0.2, 0.5)], vec![Point::xy(0.7, 0.7)]).unwrap();
        let before = s.clone();
        m.step_all(&mut s, &dom, 0.1, &mut stream(0, 0)).unwrap();
        assert_eq!(s.xs(), before.xs());
        assert_eq!(s.ys(), before.ys());
        assert_eq!(s.time(), 0.1);
    }

    #[test]
    fn pure_drift() {
        let dom = Domain::unit_square();
        let motion = TypeMotion { sigma: Sigma::Scalar(0.0), drift: Drift::Constant(vec![1.0, 0.0]) };
        let m = MotionModel { x: motion, y: TypeMotion::default(), dt_diff: 0.1 };
        let mut s = SystemState::new(0.0, vec![Point::xy(0.2, 0.5)], vec![]).unwrap();
        m.step_all(&mut s, &dom, 0.1, &mut stream(0, 0)).unwrap();
        assert!((s.xs()[0].get(0) - 0.3).abs() < 1e-15);
        assert_eq!(s.xs()[0].get(1), 0.5);
    }

    #[test]
    fn single_step_variance() {
        let dom = Domain::unit_square();
        let sigma = 0.5;
        let dt = 1e-3;
        let m = MotionModel::isotropic(sigma, 0.0, dt);
        let mut rng = stream(7, 0);
        let n = 100_000;
        let mut dx = Vec::with_capacity(n);
        let mut dy = Vec::with_capacity(n);
        for _ in 0..n {
            let mut s = SystemState::new(0.0, vec![Point::xy(0.5, 0.5)], vec![]).unwrap();
            m.step_all(&mut s, &dom, dt, &mut rng).unwrap();
            dx.push(s.xs()[0].get(0) - 0.5);
            dy.push(s.xs()[0].get(1) - 0.5);
        }
        let target = sigma * sigma * dt;
        // sample variance of n normals has sd target * sqrt(2/(n-1))
        let tol = 3.0 * target * (2.0 / (n as f64 - 1.0)).sqrt();
        for d in [dx, dy] {
            let (_, v) = mean_var(&d);
            assert!((v - target).abs() < tol, "{v} vs {target}");
        }
    }

    #[test]
    fn matrix_sigma_matches_covariance() {
        let dom = Domain::cuboid(Point::xy(-100.0, -100.0), Point::xy(100.0, 100.0)).unwrap();
        let sig = vec![vec![1.0, 0.0], vec![0.5, 0.5]];
        let m = MotionModel {
            x: TypeMotion { sigma: Sigma::Matrix(sig), drift: Drift::default() },
            y: TypeMotion::default(),
            dt_diff: 1.0,
        };
        let mut rng = stream(3, 0);
        let n = 50_000;
        let mut sxy = 0.0;
        for _ in 0..n {
            let mut s = SystemState::new(0.0, vec![Point::xy(0.0, 0.0)], vec![]).unwrap();
            m.step_all(&mut s, &dom, 1.0, &mut rng).unwrap();
            sxy += s.xs()[0].get(0) * s.xs()[0].get(1);
        }
        // Sigma Sigma^T off-diagonal = 0.5; Var(XY) = 1*0.5 + 0.25 = 0.75
        let tol = 4.0 * (0.75f64 / n as f64).sqrt();
        assert!((sxy / n as f64 - 0.5).abs() < tol);
    }

    #[test]
    fn steps_longer_than_dt_diff_are_rejected() {
        let m = MotionModel::frozen(0.1);
        let mut s = SystemState::empty(2);
        assert!(m.step_all(&mut s, &Domain::unit_square(), 0.2, &mut stream(0, 0)).is_err());
    }

    #[test]
    fn containment_and_counts_preserved() {
        let dom = Domain::disk(Point::xy(0.0, 0.0), 1.0).unwrap();
        let m = MotionModel::isotropic(2.0, 1.0, 0.05);
        let mut rng = stream(11, 0);
        let xs: Vec<Point> = (0..50).map(|_| dom.sample_uniform(&mut rng)).collect();
        let ys: Vec<Point> = (0..20).map(|_| dom.sample_uniform(&mut rng)).collect();
        let mut s = SystemState::new(0.0, xs, ys).unwrap();
        for _ in 0..200 {
            m.step_all(&mut s, &dom, 0.05, &mut rng).unwrap();
            assert_eq!(s.marginal_counts(), (50, 20));
            assert!(s.xs().iter().chain(s.ys()).all(|q| dom.contains(q).unwrap()));
        }
    }

    #[test]
    fn mean_square_displacement_is_linear() {
        // box large enough that no path reaches the wall
        let dom = Domain::cuboid(Point::xy(-50.0, -50.0), Point::xy(50.0, 50.0)).unwrap();
        let sigma = 0.5;
        let dt = 0.01;
        let m = MotionModel::isotropic(sigma, 0.0, dt);
        let mut rng = stream(5, 0);
        let paths = 10_000;
        let steps = 100;
        let mut msd = vec![0.0; steps];
        for _ in 0..paths {
            let mut s = SystemState::new(0.0, vec![Point::xy(0.0, 0.0)], vec![]).unwrap();
            for k in 0..steps {
                m.step_all(&mut s, &dom, dt, &mut rng).unwrap();
                msd[k] += s.xs()[0].norm_sq() / paths as f64;
            }
        }
        let ts: Vec<f64> = (1..=steps).map(|k| k as f64 * dt).collect();
        let (_, slope) = linear_fit(&ts, &msd);
        let expected = 2.0 * sigma * sigma;
        assert!((slope / expected - 1.0).abs() < 0.05, "slope {slope}");
    }
}
