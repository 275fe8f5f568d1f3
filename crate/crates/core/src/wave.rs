use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::observables;

/// Relative packet mass tolerated inside the boundary zones at preparation.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

/// Complex amplitudes on a grid at a given time (atomic units, hbar = m = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
    time: f64,
}

impl WaveFunction {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: format!(
                    "length {} does not match grid size {}",
                    amplitudes.len(),
                    grid.n_points()
                ),
            });
        }
        Ok(Self { grid, amplitudes, time })
    }

    /// Sample `f` on every grid point.
    pub fn from_fn(grid: Grid, time: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.points().map(f).collect();
        Self { grid, amplitudes, time }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
            time: self.time,
        }
    }

    /// Rescale to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = observables::norm(self);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// Mass in the two boundary zones relative to the total norm.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let zone = self.grid.boundary_zone();
        let n = self.amplitudes.len();
        let edge: f64 = self.amplitudes[..zone]
            .iter()
            .chain(&self.amplitudes[n - zone..])
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            * self.grid.dx();
        let total = observables::norm(self);
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }
}

/// Minimum-uncertainty Gaussian: centre, mean momentum and position variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrep {
    pub x0: f64,
    pub p0: f64,
    pub var_x: f64,
}

impl GaussianPrep {
    /// Momentum variance of the minimum-uncertainty packet, 1/(4 var_x).
    pub fn var_p(&self) -> f64 {
        0.25 / self.var_x
    }
}

/// `psi(x) ∝ exp(-(x-x0)^2/(4 var_x) + i p0 x)`, unit norm on the grid, t = 0.
pub fn prepare_gaussian(grid: &Grid, prep: &GaussianPrep) -> Result<WaveFunction> {
    if !(prep.var_x > 0.0) {
        return Err(Error::InvalidParameter {
            name: "var_x",
            reason: format!("must be positive, got {}", prep.var_x),
        });
    }
    let width = prep.var_x.sqrt();
    let margin = (prep.x0 - grid.x_min()).min(grid.x_max() - prep.x0);
    if margin < 8.0 * width {
        return Err(Error::SupportViolation(format!(
            "centre {} is {margin} from the nearest wall, need at least {}",
            prep.x0,
            8.0 * width
        )));
    }
    let n = grid.n_points();
    let mut psi = WaveFunction::from_fn(*grid, 0.0, |x| {
        let u = x - prep.x0;
        Complex64::from_polar((-u * u / (4.0 * prep.var_x)).exp(), prep.p0 * x)
    });
    // hard walls
    psi.amplitudes[0] = Complex64::new(0.0, 0.0);
    psi.amplitudes[n - 1] = Complex64::new(0.0, 0.0);
    let psi = psi.normalized()?;
    let edge = psi.boundary_mass_fraction();
    if edge >= SUPPORT_TOLERANCE {
        return Err(Error::SupportViolation(format!(
            "boundary mass fraction {edge:e} exceeds {SUPPORT_TOLERANCE:e}"
        )));
    }
    Ok(psi)
}
