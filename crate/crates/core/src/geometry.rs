//! The bounded domain lesions live in.
//!
//! Two shapes are supported: a disk (a ball in 3-D) and an axis-aligned box.
//! Both are convex, so any point on a segment between two interior points is
//! interior as well. Lengths are in micrometres.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reflection gives up after this many bounces.
pub const MAX_REFLECTIONS: usize = 64;

/// A point in 2-D or 3-D. Unused trailing coordinates are kept at zero so
/// that distances can always be computed over three components.
#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; 3],
    dim: u8,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if !(2..=3).contains(&coords.len()) {
            return Err(Error::Input(format!(
                "points must have 2 or 3 coordinates, got {}",
                coords.len()
            )));
        }
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self { coords: c, dim: coords.len() as u8 })
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Self { coords: [x, y, 0.0], dim: 2 }
    }

    pub fn xyz(x: f64, y: f64, z: f64) -> Self {
        Self { coords: [x, y, z], dim: 3 }
    }

    pub(crate) fn zero(dim: usize) -> Self {
        Self { coords: [0.0; 3], dim: dim as u8 }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn get(&self, axis: usize) -> f64 {
        self.coords[axis]
    }

    #[inline]
    pub(crate) fn set(&mut self, axis: usize, value: f64) {
        self.coords[axis] = value;
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.coords[0] - other.coords[0];
        let dy = self.coords[1] - other.coords[1];
        let dz = self.coords[2] - other.coords[2];
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn lerp(&self, other: &Point, alpha: f64) -> Point {
        *self * alpha + *other * (1.0 - alpha)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        let mut out = self;
        for k in 0..3 {
            out.coords[k] += rhs.coords[k];
        }
        out
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        let mut out = self;
        for k in 0..3 {
            out.coords[k] -= rhs.coords[k];
        }
        out
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        let mut out = self;
        for c in &mut out.coords {
            *c *= rhs;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    Disk { center: Point, radius: f64 },
    Box { lo: Point, hi: Point },
}

/// Closed bounded domain with a reflecting boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    shape: Shape,
    dim: usize,
}

impl Domain {
    pub fn disk(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("disk radius must be positive, got {radius}")));
        }
        if !center.is_finite() {
            return Err(Error::Config("disk center must be finite".into()));
        }
        Ok(Self { shape: Shape::Disk { center, radius }, dim: center.dim() })
    }

    pub fn cuboid(lo: Point, hi: Point) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch { expected: lo.dim(), got: hi.dim() });
        }
        for k in 0..lo.dim() {
            if !(hi.get(k) > lo.get(k)) || !lo.get(k).is_finite() || !hi.get(k).is_finite() {
                return Err(Error::Config(format!(
                    "box axis {k}: need finite lo < hi, got [{}, {}]",
                    lo.get(k),
                    hi.get(k)
                )));
            }
        }
        Ok(Self { shape: Shape::Box { lo, hi }, dim: lo.dim() })
    }

    /// The unit square `[0,1]^2`.
    pub fn unit_square() -> Self {
        Self::cuboid(Point::xy(0.0, 0.0), Point::xy(1.0, 1.0)).expect("valid box")
    }

    pub fn from_spec(spec: &DomainSpec) -> Result<Self> {
        match spec {
            DomainSpec::Disk { center, radius } => Self::disk(Point::new(center)?, *radius),
            DomainSpec::Box { lo, hi } => Self::cuboid(Point::new(lo)?, Point::new(hi)?),
        }
    }

    pub fn to_spec(&self) -> DomainSpec {
        match self.shape {
            Shape::Disk { center, radius } => {
                DomainSpec::Disk { center: center.coords().to_vec(), radius }
            }
            Shape::Box { lo, hi } => {
                DomainSpec::Box { lo: lo.coords().to_vec(), hi: hi.coords().to_vec() }
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_box(&self) -> bool {
        matches!(self.shape, Shape::Box { .. })
    }

    /// Lebesgue measure of the domain (area in 2-D, volume in 3-D).
    pub fn volume(&self) -> f64 {
        match self.shape {
            Shape::Disk { radius, .. } if self.dim == 2 => PI * radius * radius,
            Shape::Disk { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Shape::Box { lo, hi } => (0..self.dim).map(|k| hi.get(k) - lo.get(k)).product(),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounds(&self) -> (Point, Point) {
        match self.shape {
            Shape::Disk { center, radius } => {
                let mut lo = center;
                let mut hi = center;
                for k in 0..self.dim {
                    lo.set(k, center.get(k) - radius);
                    hi.set(k, center.get(k) + radius);
                }
                (lo, hi)
            }
            Shape::Box { lo, hi } => (lo, hi),
        }
    }

    fn check_dim(&self, q: &Point) -> Result<()> {
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: q.dim() });
        }
        Ok(())
    }

    /// Membership in the closed domain.
    pub fn contains(&self, q: &Point) -> Result<bool> {
        self.check_dim(q)?;
        Ok(self.contains_unchecked(q))
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, q: &Point) -> bool {
        match self.shape {
            Shape::Disk { center, radius } => q.dist_sq(&center) <= radius * radius,
            Shape::Box { lo, hi } => {
                (0..self.dim).all(|k| q.get(k) >= lo.get(k) && q.get(k) <= hi.get(k))
            }
        }
    }

    /// Specular reflection of a proposed point back into the domain.
    ///
    /// Interior points are returned unchanged. Outside points are mirrored
    /// across the tangent plane at the nearest boundary point, repeatedly,
    /// until they land inside.
    pub fn reflect(&self, q: Point) -> Result<Point> {
        self.check_dim(&q)?;
        if !q.is_finite() {
            return Err(Error::ReflectionFailed(q));
        }
        let mut p = q;
        for _ in 0..MAX_REFLECTIONS {
            if self.contains_unchecked(&p) {
                return Ok(p);
            }
            match self.shape {
                Shape::Box { lo, hi } => {
                    for k in 0..self.dim {
                        let x = p.get(k);
                        if x > hi.get(k) {
                            p.set(k, 2.0 * hi.get(k) - x);
                        } else if x < lo.get(k) {
                            p.set(k, 2.0 * lo.get(k) - x);
                        }
                    }
                }
                Shape::Disk { center, radius } => {
                    let offset = p - center;
                    let n = offset.norm();
                    p = center + offset * ((2.0 * radius - n) / n);
                }
            }
        }
        if self.contains_unchecked(&p) {
            Ok(p)
        } else {
            Err(Error::ReflectionFailed(q))
        }
    }

    /// Extent `(lo, hi)` of the line through `q` parallel to the last axis
    /// inside the domain, or `None` if the line misses it. Only the first
    /// `dim - 1` coordinates of `q` matter.
    pub fn chord_along_last_axis(&self, q: &Point) -> Option<(f64, f64)> {
        let last = self.dim - 1;
        match self.shape {
            Shape::Box { lo, hi } => (0..last)
                .all(|k| q.get(k) >= lo.get(k) && q.get(k) <= hi.get(k))
                .then(|| (lo.get(last), hi.get(last))),
            Shape::Disk { center, radius } => {
                let planar: f64 = (0..last).map(|k| (q.get(k) - center.get(k)).powi(2)).sum();
                let rem = radius * radius - planar;
                (rem >= 0.0).then(|| {
                    let h = rem.sqrt();
                    (center.get(last) - h, center.get(last) + h)
                })
            }
        }
    }

    /// Uniform point in the domain (rejection from the bounding box for the disk).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (lo, hi) = self.bounds();
        loop {
            let mut p = Point::zero(self.dim);
            for k in 0..self.dim {
                p.set(k, lo.get(k) + (hi.get(k) - lo.get(k)) * rng.random::<f64>());
            }
            if self.contains_unchecked(&p) {
                return p;
            }
        }
    }
}
