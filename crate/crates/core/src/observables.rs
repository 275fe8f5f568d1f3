//! Quadrature and observable primitives on a [`WaveFunction`].
//!
//! Position-space quantities use the composite trapezoid rule and central
//! differences. Momentum moments are taken from the discrete Fourier
//! spectrum, which is exact for band-limited lattice states; a three-point
//! derivative would bias `<p>` by `(p dx)^2 / 6`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::wave::WaveFunction;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// `∫|psi|^2 dx` by the trapezoid rule.
pub fn norm(psi: &WaveFunction) -> f64 {
    norm_of(psi.amplitudes(), psi.grid().dx())
}

pub(crate) fn norm_of(amps: &[Complex64], dx: f64) -> f64 {
    let n = amps.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = amps[1..n - 1].iter().map(|a| a.norm_sqr()).sum();
    dx * (inner + 0.5 * (amps[0].norm_sqr() + amps[n - 1].norm_sqr()))
}

/// Norm restricted to grid points with index `>= from`, trapezoid weights.
pub fn norm_from(psi: &WaveFunction, from: usize) -> f64 {
    let a = psi.amplitudes();
    if from >= a.len() {
        return 0.0;
    }
    norm_of(&a[from..], psi.grid().dx())
}

/// Probability current `J = Im(psi* dpsi/dx)` (hbar = m = 1) at the grid point
/// nearest `x_probe`, central difference.
pub fn flux(psi: &WaveFunction, x_probe: f64) -> Result<f64> {
    let i = psi.grid().interior_index(x_probe)?;
    Ok(flux_at(psi.amplitudes(), i, psi.grid().dx()))
}

#[inline]
fn flux_at(amps: &[Complex64], i: usize, dx: f64) -> f64 {
    let d = (amps[i + 1] - amps[i - 1]) / (2.0 * dx);
    (amps[i].conj() * d).im
}

/// Lattice momentum distribution `|phi(k)|^2` from the DFT of the amplitudes.
#[derive(Debug, Clone)]
pub struct MomentumDistribution {
    pub k: Vec<f64>,
    pub weight: Vec<f64>,
}

impl MomentumDistribution {
    pub fn of(psi: &WaveFunction) -> Self {
        let n = psi.grid().n_points();
        let dx = psi.grid().dx();
        let mut buf = psi.amplitudes().to_vec();
        PLANNER.with(|p| {
            let fft = p.borrow_mut().plan_fft_forward(n);
            fft.process(&mut buf);
        });
        let dk = 2.0 * PI / (n as f64 * dx);
        let k = (0..n)
            .map(|j| {
                let j = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                j * dk
            })
            .collect();
        let weight = buf.iter().map(|c| c.norm_sqr()).collect();
        Self { k, weight }
    }

    pub fn total(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// Fraction of the distribution where `pred(k)` holds.
    pub fn fraction(&self, pred: impl Fn(f64) -> bool) -> f64 {
        let total = self.total();
        if total <= 0.0 {
            return 0.0;
        }
        self.k
            .iter()
            .zip(&self.weight)
            .filter(|(k, _)| pred(**k))
            .map(|(_, w)| w)
            .sum::<f64>()
            / total
    }

    /// Normalised expectation of `f(k)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let total = self.total();
        self.k.iter().zip(&self.weight).map(|(k, w)| f(*k) * w).sum::<f64>() / total
    }
}

/// `(<p>, <p^2>)` of the normalised state.
pub fn momentum_moments(psi: &WaveFunction) -> Result<(f64, f64)> {
    let n = norm(psi);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let dist = MomentumDistribution::of(psi);
    if !(dist.total() > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok((dist.expect(|k| k), dist.expect(|k| k * k)))
}

/// `(<x>, var x)` of the normalised density.
pub fn position_moments(psi: &WaveFunction) -> Result<(f64, f64)> {
    let g = psi.grid();
    let n = norm(psi);
    if !(n > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let dens: Vec<f64> = psi.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    let first: Vec<f64> = dens.iter().zip(g.points()).map(|(d, x)| d * x).collect();
    let mean = g.trapezoid(&first) / n;
    let second: Vec<f64> = dens
        .iter()
        .zip(g.points())
        .map(|(d, x)| d * (x - mean).powi(2))
        .collect();
    Ok((mean, g.trapezoid(&second) / n))
}
