use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of grid points at each end that counts as the "boundary zone"
/// when checking for packet mass near the hard walls.
pub const BOUNDARY_FRACTION: f64 = 0.01;

/// Uniform 1D lattice `x_i = x_min + i*dx`, `i = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_max > x_min) || n_points < 3 || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidExtent { x_min, x_max, n_points });
        }
        let dx = (x_max - x_min) / (n_points - 1) as f64;
        Ok(Self {
            x_min,
            x_max,
            n_points,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    /// Index of the grid point closest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let f = ((x - self.x_min) / self.dx).round();
        if f <= 0.0 {
            0
        } else {
            (f as usize).min(self.n_points - 1)
        }
    }

    /// Nearest interior index (excludes the two wall points), or an error when
    /// `x` lies outside the interior.
    pub fn interior_index(&self, x: f64) -> Result<usize> {
        let lo = self.x(1);
        let hi = self.x(self.n_points - 2);
        if !(x >= lo - 0.5 * self.dx && x <= hi + 0.5 * self.dx) {
            return Err(Error::ProbeOutOfRange { x, lo, hi });
        }
        Ok(self.nearest_index(x).clamp(1, self.n_points - 2))
    }

    /// Number of points in each boundary zone.
    pub fn boundary_zone(&self) -> usize {
        ((self.n_points as f64 * BOUNDARY_FRACTION).ceil() as usize).max(1)
    }

    /// Composite trapezoid rule for samples on this grid.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        trapezoid(values, self.dx)
    }
}

/// Composite trapezoid rule with uniform spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Convenience constructor mirroring [`Grid::new`].
pub fn make_grid(x_min: f64, x_max: f64, n_points: usize) -> Result<Grid> {
    Grid::new(x_min, x_max, n_points)
}
