//! Passage detector A (absorption-rate click density and track-formation
//! collapse) and arrival detector B (normalised flux at the barrier edge).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::trapezoid;
use crate::observables::norm_from;
use crate::potential::{Detector, PotentialSpec};
use crate::propagator::{CentredFlux, DetectionSeries, FluxProbe, Propagator, PropagatorConfig};
use crate::wave::WaveFunction;

/// Numerical thresholds shared by the detector and ensemble stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Smallest absorbed norm `N(0) - N(t_end)` treated as a detection.
    pub zero_absorption: f64,
    /// Smallest `∫g^2|psi|^2 dx` accepted by [`collapse`].
    pub zero_overlap: f64,
    /// Smallest `∫J dt` for which an arrival density is formed.
    pub zero_transmission: f64,
    /// Largest allowed ratio of clipped negative flux to positive flux.
    pub backflow_limit: f64,
    /// Largest change of `N` over the final [`Tolerances::tail_fraction`] of a
    /// passage run for it to count as converged.
    pub norm_settle: f64,
    pub tail_fraction: f64,
    /// `|J(b)|` at the horizon relative to its peak below which the branch
    /// flux counts as decayed.
    pub flux_decay: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            zero_absorption: 1e-10,
            zero_overlap: 1e-30,
            zero_transmission: 1e-14,
            backflow_limit: 0.01,
            norm_settle: 1e-6,
            tail_fraction: 0.05,
            flux_decay: 1e-4,
        }
    }
}

/// Detection-time density of the passage detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickDensity {
    pub times: Vec<f64>,
    pub density: Vec<f64>,
    /// `N(0) - N(t_end)`.
    pub efficiency: f64,
    /// Whether `N` had settled by the end of the record.
    pub converged: bool,
}

impl ClickDensity {
    /// Cumulative distribution on `times` by the trapezoid rule.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.times.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..self.times.len() {
            let h = self.times[i] - self.times[i - 1];
            acc += 0.5 * h * (self.density[i] + self.density[i - 1]);
            out.push(acc);
        }
        out
    }
}

/// Derivative of uniformly sampled data: centred differences inside,
/// second-order one-sided differences at the two ends.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => {
            let d = (values[1] - values[0]) / h;
            vec![d, d]
        }
        _ => {
            let mut d = Vec::with_capacity(n);
            d.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h));
            for w in values.windows(3) {
                d.push((w[2] - w[0]) / (2.0 * h));
            }
            d.push((3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h));
            d
        }
    }
}

/// Click density `-dN/dt / (N(0) - N(t_end))` from a recorded norm.
pub fn click_density(series: &DetectionSeries, tol: &Tolerances) -> Result<ClickDensity> {
    series.validate()?;
    let norm = series.norm.as_ref().ok_or(Error::MissingNorm)?;
    if norm.len() < 3 {
        return Err(Error::Series("need at least three samples".into()));
    }
    let absorbed = norm[0] - norm[norm.len() - 1];
    if !(absorbed > tol.zero_absorption) {
        return Err(Error::ZeroAbsorption { absorbed });
    }
    let h = series.dt();
    let density: Vec<f64> = derivative(norm, h)
        .into_iter()
        .map(|d| (-d / absorbed).max(0.0))
        .collect();
    let n = norm.len();
    let tail_start = ((1.0 - tol.tail_fraction) * (n - 1) as f64).floor() as usize;
    let converged = (norm[tail_start] - norm[n - 1]).abs() < tol.norm_settle;
    Ok(ClickDensity {
        times: series.times.clone(),
        density,
        efficiency: absorbed,
        converged,
    })
}

/// Track-formation collapse `g psi / sqrt(∫g^2|psi|^2 dx)`.
pub fn collapse(psi: &WaveFunction, detector: &Detector, tol: &Tolerances) -> Result<WaveFunction> {
    let g = psi.grid();
    let gpsi: Vec<Complex64> = psi
        .amplitudes()
        .iter()
        .zip(g.points())
        .map(|(a, x)| a * detector.g(x))
        .collect();
    let dens: Vec<f64> = gpsi.iter().map(|a| a.norm_sqr()).collect();
    let overlap = g.trapezoid(&dens);
    if !(overlap > tol.zero_overlap) {
        return Err(Error::ZeroOverlap { overlap });
    }
    let scale = 1.0 / overlap.sqrt();
    WaveFunction::new(*g, gpsi.into_iter().map(|a| a * scale).collect(), psi.time())
}

/// Arrival-time density at B together with its normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalDensity {
    pub times: Vec<f64>,
    /// Normalised flux with negative samples clipped to zero.
    pub density: Vec<f64>,
    /// Signed `∫J(b,t) dt`.
    pub transmittance: f64,
    /// `∫max(-J, 0) dt / ∫max(J, 0) dt`.
    pub clipped_fraction: f64,
}

impl ArrivalDensity {
    /// Linear interpolation of the density, zero outside the record.
    pub fn at(&self, t: f64) -> f64 {
        let ts = &self.times;
        if ts.is_empty() || t < ts[0] || t > ts[ts.len() - 1] {
            return 0.0;
        }
        let j = ts.partition_point(|&s| s <= t);
        if j == 0 {
            return self.density[0];
        }
        if j >= ts.len() {
            return self.density[ts.len() - 1];
        }
        let (t0, t1) = (ts[j - 1], ts[j]);
        let u = (t - t0) / (t1 - t0);
        self.density[j - 1] * (1.0 - u) + self.density[j] * u
    }

    pub fn mean_time(&self) -> f64 {
        let h = self.times.get(1).map_or(0.0, |t| t - self.times[0]);
        let first: Vec<f64> = self.times.iter().zip(&self.density).map(|(t, d)| t * d).collect();
        trapezoid(&first, h)
    }
}

fn arrival_from_flux(times: &[f64], flux: &[f64], h: f64, tol: &Tolerances) -> Result<ArrivalDensity> {
    let transmittance = trapezoid(flux, h);
    let positive: Vec<f64> = flux.iter().map(|j| j.max(0.0)).collect();
    let negative: Vec<f64> = flux.iter().map(|j| (-j).max(0.0)).collect();
    let pos = trapezoid(&positive, h);
    let neg = trapezoid(&negative, h);
    if !(transmittance > tol.zero_transmission) || !(pos > 0.0) {
        return Err(Error::ZeroTransmission {
            transmitted: transmittance,
        });
    }
    let clipped_fraction = neg / pos;
    if clipped_fraction > tol.backflow_limit {
        return Err(Error::Backflow {
            fraction: clipped_fraction,
            limit: tol.backflow_limit,
        });
    }
    Ok(ArrivalDensity {
        times: times.to_vec(),
        density: positive.iter().map(|j| j / pos).collect(),
        transmittance,
        clipped_fraction,
    })
}

/// Normalised-flux arrival density at the probe nearest `b`.
pub fn arrival_density(series: &DetectionSeries, b: f64, tol: &Tolerances) -> Result<ArrivalDensity> {
    series.validate()?;
    let probe = series.probe(b)?;
    arrival_from_flux(&series.times, &probe.flux, series.dt(), tol)
}

/// Result of propagating one collapsed branch with detector A switched off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchOutcome {
    pub t_a: f64,
    /// Flux at b from `t_a` to the end of the record.
    pub series: DetectionSeries,
    /// `∫J(b,t) dt` over the record.
    pub transmittance_flux: f64,
    /// Norm beyond b at the end of the record minus the norm beyond b at `t_a`.
    pub transmittance_norm: f64,
    /// False when `|J(b)|` had not decayed by the end of the record.
    pub flux_decayed: bool,
}

impl BranchOutcome {
    /// Transmittance used downstream: the time-integrated flux.
    pub fn transmittance(&self) -> f64 {
        self.transmittance_flux
    }

    pub fn arrival(&self, tol: &Tolerances) -> Result<ArrivalDensity> {
        let p = &self.series.probes[0];
        arrival_from_flux(&self.series.times, &p.flux, self.series.dt(), tol)
    }
}

/// Propagate collapsed states under `prop` (detector A off) up to the common
/// absolute time `t_end`, recording the flux at lattice point `b_index`.
/// States may start at different times; each record runs from its own start.
pub fn propagate_branches(
    prop: &Propagator,
    states: &[WaveFunction],
    b_index: usize,
    t_end: f64,
    tol: &Tolerances,
) -> Result<Vec<BranchOutcome>> {
    let grid = *prop.grid();
    if b_index == 0 || b_index + 1 >= grid.n_points() {
        return Err(Error::ProbeOutOfRange {
            x: grid.x(b_index.min(grid.n_points() - 1)),
            lo: grid.x(1),
            hi: grid.x(grid.n_points() - 2),
        });
    }
    if let Some(s) = states.iter().find(|s| !(s.time() < t_end)) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("{t_end} is not after the branch start {}", s.time()),
        });
    }
    let dx = grid.dx();
    let dt = prop.dt();
    let steps: Vec<usize> = states.iter().map(|s| prop.steps_to(s.time(), t_end)).collect();
    let before: Vec<f64> = states.iter().map(|s| norm_from(s, b_index)).collect();
    let mut after = vec![0.0; states.len()];
    let mut fluxes: Vec<CentredFlux> = states
        .iter()
        .zip(&steps)
        .map(|(s, &n)| {
            let a = s.amplitudes();
            CentredFlux::new([a[b_index - 1], a[b_index], a[b_index + 1]], dx, n)
        })
        .collect();
    let mut work = states.to_vec();
    prop.evolve_batch(&mut work, &steps, |k, view| {
        for s in view.states() {
            if k > 0 && k <= steps[s] {
                fluxes[s].push(view.triple(s, b_index));
            }
            if k == steps[s] {
                after[s] = view.norm_from(s, b_index, dx);
            }
        }
    });
    let mut out = Vec::with_capacity(states.len());
    for (((s, flux), n), (before, after)) in states.iter().zip(fluxes).zip(&steps).zip(before.iter().zip(&after)) {
        let flux = flux.finish();
        let t0 = s.time();
        let times: Vec<f64> = (0..=*n).map(|k| t0 + k as f64 * dt).collect();
        let transmittance_flux = trapezoid(&flux, dt);
        let peak = flux.iter().fold(0.0f64, |m, j| m.max(j.abs()));
        let last = flux.last().copied().unwrap_or(0.0).abs();
        let flux_decayed = last <= tol.flux_decay * peak;
        if !flux_decayed && transmittance_flux > tol.zero_transmission {
            log::debug!(
                "branch t_a={t0:.4}: flux at b still {:.2e} of its peak at t={t_end}",
                last / peak
            );
        }
        out.push(BranchOutcome {
            t_a: t0,
            series: DetectionSeries {
                times,
                norm: None,
                probes: vec![FluxProbe {
                    x: grid.x(b_index),
                    index: b_index,
                    flux,
                }],
                dx,
                dt_over_dx2: dt / (dx * dx),
                max_boundary_mass: 0.0,
            },
            transmittance_flux,
            transmittance_norm: after - before,
            flux_decayed,
        });
    }
    Ok(out)
}

/// `P(E_b | t_a)`: flux through `b` over `[t_a, t_a + horizon]` with every
/// detector off.
pub fn transmittance(
    psi_at_ta: &WaveFunction,
    spec: &PotentialSpec,
    cfg: &PropagatorConfig,
    b: f64,
    horizon: f64,
    tol: &Tolerances,
) -> Result<BranchOutcome> {
    if spec.active_detector().is_some() {
        return Err(Error::InvalidParameter {
            name: "spec",
            reason: "detector A must be off after its click".into(),
        });
    }
    let prop = Propagator::new(psi_at_ta.grid(), spec, cfg)?;
    let b_index = psi_at_ta.grid().interior_index(b)?;
    let t_end = psi_at_ta.time() + horizon;
    let mut out = propagate_branches(&prop, std::slice::from_ref(psi_at_ta), b_index, t_end, tol)?;
    Ok(out.remove(0))
}
