use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Real square barrier of height `height` on `[left, left + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub left: f64,
    pub width: f64,
    pub height: f64,
}

impl Barrier {
    pub fn none() -> Self {
        Self {
            left: 0.0,
            width: 0.0,
            height: 0.0,
        }
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        if x >= self.left && x < self.left + self.width {
            self.height
        } else {
            0.0
        }
    }
}

/// Gaussian passage detector `g(x) = s exp(-(x-a)^2 / (2 sigma^2))`; it
/// contributes `-(i/2) g^2` to the potential while active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub a: f64,
    pub s: f64,
    pub sigma: f64,
    pub active: bool,
}

impl Detector {
    pub fn new(a: f64, s: f64, sigma: f64) -> Self {
        Self {
            a,
            s,
            sigma,
            active: true,
        }
    }

    #[inline]
    pub fn g(&self, x: f64) -> f64 {
        let u = (x - self.a) / self.sigma;
        self.s * (-0.5 * u * u).exp()
    }

    pub fn deactivated(mut self) -> Self {
        self.active = false;
        self
    }
}

/// Everything entering the effective Hamiltonian besides the kinetic term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub barrier: Barrier,
    pub detectors: Vec<Detector>,
    /// Spatially uniform absorber `-(i/2) s^2` (the wide-detector limit).
    pub flat_absorber: Option<f64>,
}

impl PotentialSpec {
    pub fn barrier_only(barrier: Barrier) -> Self {
        Self {
            barrier,
            detectors: Vec::new(),
            flat_absorber: None,
        }
    }

    pub fn free() -> Self {
        Self::barrier_only(Barrier::none())
    }

    pub fn with_detector(mut self, detector: Detector) -> Self {
        self.detectors.push(detector);
        self
    }

    pub fn with_flat_absorber(mut self, s: f64) -> Self {
        self.flat_absorber = Some(s);
        self
    }

    /// Copy with every detector switched off.
    pub fn detectors_off(&self) -> Self {
        Self {
            barrier: self.barrier,
            detectors: self.detectors.iter().map(|d| d.deactivated()).collect(),
            flat_absorber: None,
        }
    }

    pub fn active_detector(&self) -> Option<&Detector> {
        self.detectors.iter().find(|d| d.active)
    }

    /// True when the Hamiltonian is real (no absorbing terms switched on).
    pub fn is_real(&self) -> bool {
        self.active_detector().is_none() && self.flat_absorber.is_none_or(|s| s == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.barrier;
        if !(b.width >= 0.0) || !b.height.is_finite() || !b.left.is_finite() {
            return Err(Error::InvalidParameter {
                name: "barrier",
                reason: format!("{b:?}"),
            });
        }
        for d in &self.detectors {
            if !(d.sigma > 0.0) || !(d.s >= 0.0) || !d.a.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "detector",
                    reason: format!("{d:?}"),
                });
            }
        }
        if self.detectors.iter().filter(|d| d.active).count() > 1 {
            return Err(Error::MultipleActiveDetectors);
        }
        if let Some(s) = self.flat_absorber {
            if !(s >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "flat_absorber",
                    reason: format!("intensity must be nonnegative, got {s}"),
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, x: f64) -> Complex64 {
        let mut absorb: f64 = self.detectors.iter().filter(|d| d.active).map(|d| d.g(x).powi(2)).sum();
        if let Some(s) = self.flat_absorber {
            absorb += s * s;
        }
        Complex64::new(self.barrier.value(x), -0.5 * absorb)
    }
}

/// `V(x) + Λ(x)` sampled on the grid.
pub fn evaluate_potential(spec: &PotentialSpec, grid: &Grid) -> Vec<Complex64> {
    grid.points().map(|x| spec.value(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;

    fn default_barrier() -> Barrier {
        Barrier {
            left: 80.0,
            width: 1.0,
            height: 50.0,
        }
    }

    #[test]
    fn barrier_values() {
        let spec = PotentialSpec::barrier_only(default_barrier());
        assert_eq!(spec.value(80.5), Complex64::new(50.0, 0.0));
        assert_eq!(spec.value(80.0), Complex64::new(50.0, 0.0));
        assert_eq!(spec.value(81.0), Complex64::new(0.0, 0.0));
        assert_eq!(spec.value(79.99), Complex64::new(0.0, 0.0));
        let g = make_grid(0.0, 100.0, 1001).unwrap();
        let v = evaluate_potential(&spec, &g);
        assert_eq!(v.iter().filter(|c| c.re == 50.0).count(), 10);
    }

    #[test]
    fn detector_values() {
        let det = Detector::new(50.0, 1.0, 4.5);
        let spec = PotentialSpec::barrier_only(default_barrier()).with_detector(det);
        assert_relative_eq!(spec.value(50.0).im, -0.5, epsilon = 1e-15);
        assert_relative_eq!(spec.value(54.5).im, -0.5 * (-1.0f64).exp(), epsilon = 1e-15);
        let s = 3.0;
        let spec = PotentialSpec::free().with_detector(Detector::new(50.0, s, 0.2));
        assert_relative_eq!(
            spec.value(50.2).im,
            -0.5 * s * s * (-1.0f64).exp(),
            max_relative = 1e-12
        );
        assert_eq!(spec.detectors_off().value(50.0).im, 0.0);
    }

    #[test]
    fn flat_absorber() {
        let spec = PotentialSpec::free().with_flat_absorber(2.0);
        assert_eq!(spec.value(-1e3), Complex64::new(0.0, -2.0));
        assert!(!spec.is_real());
    }

    #[test]
    fn validation() {
        let two = PotentialSpec::free()
            .with_detector(Detector::new(50.0, 1.0, 1.0))
            .with_detector(Detector::new(90.0, 1.0, 1.0));
        assert_eq!(two.validate(), Err(Error::MultipleActiveDetectors));
        let mut ok = two.clone();
        ok.detectors[1].active = false;
        assert!(ok.validate().is_ok());
        let bad = PotentialSpec::free().with_detector(Detector::new(50.0, 1.0, 0.0));
        assert!(bad.validate().is_err());
        let neg = PotentialSpec::barrier_only(Barrier {
            width: -1.0,
            ..default_barrier()
        });
        assert!(neg.validate().is_err());
    }
}
