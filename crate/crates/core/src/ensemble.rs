//! Ensemble statistics over collapsed branches: the double average of the
//! momentum, the conditional probability of reaching B, the traversal-time
//! distribution and the two-flux time `tau_T`.

use serde::{Deserialize, Serialize};

use crate::detectors::{ArrivalDensity, ClickDensity};
use crate::error::{Error, Result};
use crate::grid::trapezoid;
use crate::propagator::DetectionSeries;

/// One detection time drawn from the click density, with what became of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickSample {
    pub t_a: f64,
    pub weight: f64,
    /// `(<p>, <p^2>)` of the collapsed state.
    pub momentum: (f64, f64),
    /// `P(E_b | t_a)`; zero until the branch has been propagated.
    pub transmittance: f64,
    /// `None` for branches below the transmission threshold.
    pub arrival: Option<ArrivalDensity>,
}

/// Step index and weight of each sampled click time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickNode {
    pub index: usize,
    pub t_a: f64,
    pub weight: f64,
}

/// `m` equal-probability nodes at the mid-quantiles `(k + 1/2) / m` of the
/// click density, snapped to the nearest recorded step, each of weight `1/m`.
pub fn quantile_nodes(cd: &ClickDensity, m: usize) -> Result<Vec<ClickNode>> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "need at least one sample".into(),
        });
    }
    let cum = cd.cumulative();
    let total = *cum.last().ok_or(Error::EmptyEnsemble)?;
    if !(total > 0.0) {
        return Err(Error::EmptyEnsemble);
    }
    let mut nodes = Vec::with_capacity(m);
    for k in 0..m {
        let q = (k as f64 + 0.5) / m as f64 * total;
        let j = cum.partition_point(|&c| c < q).clamp(1, cum.len() - 1);
        let (c0, c1) = (cum[j - 1], cum[j]);
        let u = if c1 > c0 { (q - c0) / (c1 - c0) } else { 0.5 };
        let index = if u < 0.5 { j - 1 } else { j };
        nodes.push(ClickNode {
            index,
            t_a: cd.times[index],
            weight: 1.0 / m as f64,
        });
    }
    Ok(nodes)
}

fn total_weight(samples: &[ClickSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let w: f64 = samples.iter().map(|s| s.weight).sum();
    if !(w > 0.0) {
        return Err(Error::EmptyEnsemble);
    }
    Ok(w)
}

/// `(DQp, Δ_DQ)`: weighted mean of `<p>` and the square root of
/// `D Q[p^2] - (DQp)^2`.
pub fn dq_momentum_stats(samples: &[ClickSample]) -> Result<(f64, f64)> {
    let w = total_weight(samples)?;
    let mean = samples.iter().map(|s| s.weight * s.momentum.0).sum::<f64>() / w;
    let second = samples.iter().map(|s| s.weight * s.momentum.1).sum::<f64>() / w;
    Ok((mean, (second - mean * mean).max(0.0).sqrt()))
}

/// `P(E_b | E_a) = Σ w T / Σ w`.
pub fn p_b_given_a(samples: &[ClickSample]) -> Result<f64> {
    let w = total_weight(samples)?;
    Ok(samples.iter().map(|s| s.weight * s.transmittance).sum::<f64>() / w)
}

/// Traversal-time density `P(τ | E_b)` and its mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalResult {
    pub tau_grid: Vec<f64>,
    pub density: Vec<f64>,
    pub mean_tau: f64,
    pub p_b_given_a: f64,
    /// Weights of branches whose arrival density entered the mixture, as a
    /// fraction of all weight.
    pub included_weight: f64,
    /// Grid integral of the mixture before renormalisation.
    pub raw_mass: f64,
}

/// Uniform grid `0, h, 2h, ...` covering `[0, span]`.
pub fn tau_grid(span: f64, h: f64) -> Vec<f64> {
    let n = (span / h).round() as usize;
    (0..=n).map(|k| k as f64 * h).collect()
}

/// Mass outside the grid tolerated before [`Error::TauGridCoverage`].
pub const COVERAGE_TOLERANCE: f64 = 1e-3;

/// Mixture `Σ w T P(t_a + τ | t_a) / Σ w T` over branches with an arrival
/// density, renormalised on `tau_grid`.
pub fn traversal_distribution(samples: &[ClickSample], tau_grid: &[f64]) -> Result<TraversalResult> {
    let total_w = total_weight(samples)?;
    let p = p_b_given_a(samples)?;
    if tau_grid.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "tau_grid",
            reason: "need at least two points".into(),
        });
    }
    let h = tau_grid[1] - tau_grid[0];
    let mut density = vec![0.0; tau_grid.len()];
    let mut denom = 0.0;
    let mut included = 0.0;
    for s in samples {
        let Some(arr) = &s.arrival else { continue };
        let c = s.weight * s.transmittance;
        if !(c > 0.0) {
            continue;
        }
        denom += c;
        included += s.weight;
        for (d, tau) in density.iter_mut().zip(tau_grid) {
            *d += c * arr.at(s.t_a + tau);
        }
    }
    if !(denom > 0.0) {
        return Err(Error::AllReflected);
    }
    for d in density.iter_mut() {
        *d /= denom;
    }
    let raw_mass = trapezoid(&density, h);
    if (1.0 - raw_mass).abs() > COVERAGE_TOLERANCE {
        return Err(Error::TauGridCoverage {
            missing: 1.0 - raw_mass,
        });
    }
    for d in density.iter_mut() {
        *d /= raw_mass;
    }
    let first: Vec<f64> = tau_grid.iter().zip(&density).map(|(t, d)| t * d).collect();
    let mean_tau = trapezoid(&first, h);
    Ok(TraversalResult {
        tau_grid: tau_grid.to_vec(),
        density,
        mean_tau,
        p_b_given_a: p,
        included_weight: included / total_w,
        raw_mass,
    })
}

/// Relative peak level below which the incident flux at `a` counts as over.
pub const T_C_LEVEL: f64 = 1e-6;

/// First recorded time after the flux maximum at `a` where `|J(a)|` drops
/// below [`T_C_LEVEL`] of the peak.
pub fn select_t_c(series: &DetectionSeries, a: f64) -> Result<f64> {
    let probe = series.probe(a)?;
    let (peak_i, peak) = probe
        .flux
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    if !(peak > 0.0) {
        return Err(Error::NonpositiveDenominator(peak));
    }
    probe.flux[peak_i..]
        .iter()
        .position(|j| j.abs() < T_C_LEVEL * peak)
        .map(|k| series.times[peak_i + k])
        .ok_or_else(|| Error::Series(format!("flux at a={a} never falls below {T_C_LEVEL:e} of its peak")))
}

fn first_moment(times: &[f64], flux: &[f64], h: f64) -> Result<f64> {
    let den = trapezoid(flux, h);
    if !(den > 0.0) {
        return Err(Error::NonpositiveDenominator(den));
    }
    let num: Vec<f64> = times.iter().zip(flux).map(|(t, j)| t * j).collect();
    Ok(trapezoid(&num, h) / den)
}

/// `<t>_out(b) - <t>_in(a)` from a detector-free run. The incident average
/// runs over `[t_0, t_c]`, the outgoing one over the whole record.
pub fn tau_t(series: &DetectionSeries, a: f64, b: f64, t_c: f64) -> Result<f64> {
    series.validate()?;
    let h = series.dt();
    let inc = series.probe(a)?;
    let out = series.probe(b)?;
    let end = series.times.partition_point(|&t| t <= t_c + 1e-12 * t_c.abs());
    if end < 2 {
        return Err(Error::NonpositiveDenominator(0.0));
    }
    let t_in = first_moment(&series.times[..end], &inc.flux[..end], h)?;
    let t_out = first_moment(&series.times, &out.flux, h)?;
    Ok(t_out - t_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::FluxProbe;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gaussian_arrival(center: f64, width: f64, t0: f64, n: usize, h: f64) -> ArrivalDensity {
        let times: Vec<f64> = (0..n).map(|k| t0 + k as f64 * h).collect();
        let raw: Vec<f64> = times
            .iter()
            .map(|t| (-(t - center).powi(2) / (2.0 * width * width)).exp())
            .collect();
        let z = trapezoid(&raw, h);
        ArrivalDensity {
            density: raw.iter().map(|v| v / z).collect(),
            times,
            transmittance: 0.5,
            clipped_fraction: 0.0,
        }
    }

    fn sample(t_a: f64, weight: f64, t: f64, arrival: Option<ArrivalDensity>) -> ClickSample {
        ClickSample {
            t_a,
            weight,
            momentum: (8.0, 64.0),
            transmittance: t,
            arrival,
        }
    }

    #[test]
    fn p_b_given_a_arithmetic() {
        let s = vec![sample(0.0, 0.5, 0.2, None), sample(1.0, 0.5, 0.4, None)];
        assert_relative_eq!(p_b_given_a(&s).unwrap(), 0.3, epsilon = 1e-15);
        let ones = vec![sample(0.0, 0.3, 1.0, None), sample(1.0, 0.7, 1.0, None)];
        assert_relative_eq!(p_b_given_a(&ones).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(p_b_given_a(&[]), Err(Error::EmptyEnsemble));
    }

    #[test]
    fn single_sample_momentum() {
        let s = vec![ClickSample {
            momentum: (7.9, 7.9 * 7.9 + 0.25),
            ..sample(0.0, 1.0, 0.0, None)
        }];
        let (m, d) = dq_momentum_stats(&s).unwrap();
        assert_relative_eq!(m, 7.9, epsilon = 1e-14);
        assert_relative_eq!(d, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_sample_traversal_is_shifted_arrival() {
        let h = 0.002;
        let arr = gaussian_arrival(5.0, 0.3, 2.0, 3501, h);
        let s = vec![sample(2.0, 1.0, 0.5, Some(arr))];
        let grid = tau_grid(7.0, 10.0 * h);
        let r = traversal_distribution(&s, &grid).unwrap();
        assert_relative_eq!(r.mean_tau, 3.0, epsilon = 1e-6);
        assert_relative_eq!(r.p_b_given_a, 0.5, epsilon = 1e-15);
        assert_relative_eq!(trapezoid(&r.density, 10.0 * h), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shift_invariance_and_exclusion() {
        let h = 0.002;
        let a = gaussian_arrival(5.0, 0.3, 2.0, 3501, h);
        let b = gaussian_arrival(5.5, 0.3, 2.5, 3501, h);
        let grid = tau_grid(7.0, 10.0 * h);
        let one = traversal_distribution(&[sample(2.0, 1.0, 0.5, Some(a.clone()))], &grid).unwrap();
        let two = traversal_distribution(
            &[
                sample(2.0, 1.0, 0.5, Some(a)),
                sample(2.5, 1.0, 0.5, Some(b)),
                sample(3.0, 1.0, 1e-12, None),
            ],
            &grid,
        )
        .unwrap();
        for (x, y) in one.density.iter().zip(&two.density) {
            assert!((x - y).abs() < 1e-6);
        }
        assert_relative_eq!(two.included_weight, 2.0 / 3.0, epsilon = 1e-15);
        let none = traversal_distribution(&[sample(0.0, 1.0, 0.0, None)], &grid);
        assert_eq!(none, Err(Error::AllReflected));
    }

    #[test]
    fn coverage_error() {
        let h = 0.002;
        let arr = gaussian_arrival(8.0, 0.3, 2.0, 3501, h);
        let grid = tau_grid(4.0, 10.0 * h);
        let r = traversal_distribution(&[sample(2.0, 1.0, 0.5, Some(arr))], &grid);
        assert!(matches!(r, Err(Error::TauGridCoverage { .. })));
    }

    #[test]
    fn quantiles_of_uniform_density() {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        let cd = ClickDensity {
            density: vec![0.1; times.len()],
            times,
            efficiency: 1.0,
            converged: true,
        };
        let nodes = quantile_nodes(&cd, 4).unwrap();
        let ts: Vec<f64> = nodes.iter().map(|n| n.t_a).collect();
        for (t, want) in ts.iter().zip([1.25, 3.75, 6.25, 8.75]) {
            assert!((t - want).abs() <= 0.005 + 1e-12, "{t} vs {want}");
        }
        assert!(nodes.iter().all(|n| n.weight == 0.25));
    }

    #[test]
    fn tau_t_of_shifted_gaussians() {
        let h = 0.01;
        let times: Vec<f64> = (0..=2000).map(|k| k as f64 * h).collect();
        let bump = |c: f64| times.iter().map(|t| (-(t - c).powi(2) / 0.5).exp()).collect::<Vec<_>>();
        let series = DetectionSeries {
            times: times.clone(),
            norm: None,
            probes: vec![
                FluxProbe {
                    x: 50.0,
                    index: 500,
                    flux: bump(4.0),
                },
                FluxProbe {
                    x: 80.0,
                    index: 800,
                    flux: bump(7.75).iter().map(|v| 0.3 * v).collect(),
                },
            ],
            dx: 0.1,
            dt_over_dx2: 0.0,
            max_boundary_mass: 0.0,
        };
        let t_c = select_t_c(&series, 50.0).unwrap();
        assert!(t_c > 6.0 && t_c < 7.0);
        assert_relative_eq!(tau_t(&series, 50.0, 80.0, t_c).unwrap(), 3.75, epsilon = 1e-6);
        assert_relative_eq!(tau_t(&series, 50.0, 50.0, t_c).unwrap(), 0.0, epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn weight_scaling_invariance(
            scale in 1e-3f64..1e3,
            ws in proptest::collection::vec(0.1f64..1.0, 3),
            ts in proptest::collection::vec(0.01f64..1.0, 3),
        ) {
            let h = 0.002;
            let mk = |k: usize, w: f64| ClickSample {
                t_a: 2.0 + 0.2 * k as f64,
                weight: w,
                momentum: (8.0 + 0.1 * k as f64, 64.0 + k as f64),
                transmittance: ts[k],
                arrival: Some(gaussian_arrival(5.0 + 0.3 * k as f64, 0.3, 2.0 + 0.2 * k as f64, 3501, h)),
            };
            let base: Vec<_> = (0..3).map(|k| mk(k, ws[k])).collect();
            let scaled: Vec<_> = (0..3).map(|k| mk(k, ws[k] * scale)).collect();
            let grid = tau_grid(7.0, 10.0 * h);
            let (a, b) = (traversal_distribution(&base, &grid).unwrap(), traversal_distribution(&scaled, &grid).unwrap());
            prop_assert!((a.mean_tau - b.mean_tau).abs() < 1e-12);
            prop_assert!((a.p_b_given_a - b.p_b_given_a).abs() < 1e-12);
            prop_assert_eq!(a.p_b_given_a, p_b_given_a(&base).unwrap());
            let (m1, d1) = dq_momentum_stats(&base).unwrap();
            let (m2, d2) = dq_momentum_stats(&scaled).unwrap();
            prop_assert!((m1 - m2).abs() < 1e-12 && (d1 - d2).abs() < 1e-9);
            prop_assert!(a.density.iter().all(|d| *d >= 0.0));
            prop_assert!(a.mean_tau > 0.0);
        }
    }
}
