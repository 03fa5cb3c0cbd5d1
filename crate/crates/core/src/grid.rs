//! Cartesian cell grid over a domain.
//!
//! The bounding box is split into `n` cells per axis; cells whose centre lies
//! in the domain are active. Only active cells carry field values. Faces
//! between an active cell and an inactive cell (or the outside) carry no
//! flux, which gives the discrete Neumann condition.

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};

const NO_NEIGHBOR: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    lo: Point,
    spacing: [f64; 3],
    shape: [usize; 3],
    /// full (bounding-box) index -> active index
    full_to_active: Vec<usize>,
    centers: Vec<Point>,
    /// per active cell, neighbours along -x,+x,-y,+y,-z,+z (NO_NEIGHBOR if none)
    neighbors: Vec<[usize; 6]>,
}

impl Grid {
    pub fn new(domain: &Domain, cells_per_axis: usize) -> Result<Self> {
        if cells_per_axis == 0 {
            return Err(Error::Config("grid needs at least one cell per axis".into()));
        }
        let dim = domain.dim();
        let (lo, hi) = domain.bounds();
        let mut spacing = [1.0; 3];
        let mut shape = [1usize; 3];
        for k in 0..dim {
            shape[k] = cells_per_axis;
            spacing[k] = (hi.get(k) - lo.get(k)) / cells_per_axis as f64;
        }
        let total = shape.iter().product::<usize>();
        let mut full_to_active = vec![NO_NEIGHBOR; total];
        let mut centers = Vec::new();
        for full in 0..total {
            let idx = unflatten(full, &shape);
            let mut c = lo;
            for k in 0..dim {
                c.set(k, lo.get(k) + (idx[k] as f64 + 0.5) * spacing[k]);
            }
            if domain.contains_unchecked(&c) {
                full_to_active[full] = centers.len();
                centers.push(c);
            }
        }
        if centers.is_empty() {
            return Err(Error::Config("grid has no active cells".into()));
        }
        let mut neighbors = vec![[NO_NEIGHBOR; 6]; centers.len()];
        for full in 0..total {
            let a = full_to_active[full];
            if a == NO_NEIGHBOR {
                continue;
            }
            let idx = unflatten(full, &shape);
            for k in 0..dim {
                for (side, delta) in [(0usize, -1isize), (1, 1)] {
                    let j = idx[k] as isize + delta;
                    if j < 0 || j >= shape[k] as isize {
                        continue;
                    }
                    let mut nidx = idx;
                    nidx[k] = j as usize;
                    neighbors[a][2 * k + side] = full_to_active[flatten(&nidx, &shape)];
                }
            }
        }
        Ok(Self { dim, lo, spacing, shape, full_to_active, centers, neighbors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of active cells.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dim].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    /// Total volume of the active cells.
    pub fn volume(&self) -> f64 {
        self.cell_volume() * self.len() as f64
    }

    /// Active neighbour of `cell` across the face `(axis, upper)`.
    #[inline]
    pub fn neighbor(&self, cell: usize, axis: usize, upper: bool) -> Option<usize> {
        let n = self.neighbors[cell][2 * axis + upper as usize];
        (n != NO_NEIGHBOR).then_some(n)
    }

    /// Active cell containing `q`; points falling in an inactive cell of the
    /// bounding box go to the nearest active centre.
    pub fn locate(&self, q: &Point) -> usize {
        let mut idx = [0usize; 3];
        for k in 0..self.dim {
            let f = ((q.get(k) - self.lo.get(k)) / self.spacing[k]).floor();
            idx[k] = (f.max(0.0) as usize).min(self.shape[k] - 1);
        }
        let a = self.full_to_active[flatten(&idx, &self.shape)];
        if a != NO_NEIGHBOR {
            return a;
        }
        self.centers
            .iter()
            .enumerate()
            .min_by(|(_, c1), (_, c2)| c1.dist_sq(q).total_cmp(&c2.dist_sq(q)))
            .map(|(i, _)| i)
            .expect("grid is non-empty")
    }

    /// Discrete Neumann Laplacian of `field` at `cell`.
    #[inline]
    pub fn laplacian(&self, field: &[f64], cell: usize) -> f64 {
        let u = field[cell];
        let mut acc = 0.0;
        for k in 0..self.dim {
            let h2 = self.spacing[k] * self.spacing[k];
            for side in 0..2 {
                let n = self.neighbors[cell][2 * k + side];
                if n != NO_NEIGHBOR {
                    acc += (field[n] - u) / h2;
                }
            }
        }
        acc
    }

    /// `sum(field) * cell volume`.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().sum::<f64>() * self.cell_volume()
    }
}

fn unflatten(full: usize, shape: &[usize; 3]) -> [usize; 3] {
    [full % shape[0], (full / shape[0]) % shape[1], full / (shape[0] * shape[1])]
}

fn flatten(idx: &[usize; 3], shape: &[usize; 3]) -> usize {
    idx[0] + shape[0] * (idx[1] + shape[1] * idx[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_grid_covers_everything() {
        let g = Grid::new(&Domain::unit_square(), 4).unwrap();
        assert_eq!(g.len(), 16);
        assert!((g.volume() - 1.0).abs() < 1e-15);
        assert_eq!(g.locate(&Point::xy(0.1, 0.1)), 0);
        assert_eq!(g.locate(&Point::xy(1.0, 1.0)), 15);
    }

    #[test]
    fn disk_grid_masks_corners() {
        let d = Domain::disk(Point::xy(0.0, 0.0), 1.0).unwrap();
        let g = Grid::new(&d, 20).unwrap();
        assert!(g.len() < 400);
        assert!((g.volume() - std::f64::consts::PI).abs() < 0.1);
        // a point in a masked corner cell maps to an active cell
        let c = g.locate(&Point::xy(0.99 * 0.7071, 0.99 * 0.7071));
        assert!(c < g.len());
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let d = Domain::disk(Point::xyz(0.0, 0.0, 0.0), 1.0).unwrap();
        let g = Grid::new(&d, 8).unwrap();
        let f = vec![3.0; g.len()];
        assert!((0..g.len()).all(|c| g.laplacian(&f, c) == 0.0));
    }

    #[test]
    fn laplacian_sums_to_zero() {
        let d = Domain::disk(Point::xy(0.0, 0.0), 1.0).unwrap();
        let g = Grid::new(&d, 16).unwrap();
        let f: Vec<f64> = g.centers().iter().map(|c| (3.0 * c.get(0)).sin() + c.get(1)).collect();
        let total: f64 = (0..g.len()).map(|c| g.laplacian(&f, c)).sum();
        assert!(total.abs() < 1e-9);
    }
}
