//! Scenario definition and the sweep drivers behind the two figures, plus
//! CSV/JSON persistence of their results.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{click_density, collapse, propagate_branches, ClickDensity, Tolerances};
use crate::ensemble::{
    dq_momentum_stats, p_b_given_a, quantile_nodes, select_t_c, tau_grid, tau_t, traversal_distribution, ClickNode,
    ClickSample, TraversalResult,
};
use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid};
use crate::observables::MomentumDistribution;
use crate::potential::{Barrier, Detector, PotentialSpec};
use crate::propagator::{Propagator, PropagatorConfig};
use crate::transmission::square_barrier;
use crate::wave::{prepare_gaussian, GaussianPrep, WaveFunction};

/// Everything that defines a run apart from the swept variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub prep: GaussianPrep,
    pub barrier_left: f64,
    pub barrier_height: f64,
    /// Barrier width for runs that do not sweep it.
    pub barrier_width: f64,
    /// Centre of the passage detector.
    pub detector_a: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dt: f64,
    /// Number of sampled click times per detector.
    pub samples: usize,
    /// Length of the passage-detector run.
    pub t_detect: f64,
    /// Common end time of every outgoing-flux record: the collapsed branches
    /// and the detector-free run behind `tau_T`.
    pub t_end: f64,
    /// Spacing of the traversal-time grid in units of `dt`.
    pub tau_spacing: usize,
    pub tolerances: Tolerances,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            prep: GaussianPrep {
                x0: 20.0,
                p0: 8.0,
                var_x: 2.25,
            },
            barrier_left: 80.0,
            barrier_height: 50.0,
            barrier_width: 1.0,
            detector_a: 50.0,
            x_min: 0.0,
            x_max: 300.0,
            n_points: 12001,
            dt: 0.002,
            samples: 64,
            t_detect: 7.5,
            t_end: 14.0,
            tau_spacing: 10,
            tolerances: Tolerances::default(),
        }
    }
}

/// Passage detector with the first-figure parameters `(s, sigma)` at `a`.
pub const DETECTOR_A1: (f64, f64) = (1.0, 4.5);
pub const DETECTOR_A2: (f64, f64) = (1.0, 0.2);

impl Scenario {
    pub fn grid(&self) -> Result<Grid> {
        make_grid(self.x_min, self.x_max, self.n_points)
    }

    pub fn propagator_config(&self) -> PropagatorConfig {
        PropagatorConfig::with_dt(self.dt)
    }

    pub fn barrier(&self, width: f64) -> Barrier {
        Barrier {
            left: self.barrier_left,
            width,
            height: self.barrier_height,
        }
    }

    pub fn detector(&self, s: f64, sigma: f64) -> Detector {
        Detector::new(self.detector_a, s, sigma)
    }

    /// Momentum width `sqrt(1 / (4 var_x))` of the prepared ensemble.
    pub fn delta_p(&self) -> f64 {
        self.prep.var_p().sqrt()
    }

    pub fn initial_state(&self) -> Result<WaveFunction> {
        prepare_gaussian(&self.grid()?, &self.prep)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        let positive = [
            ("dt", self.dt),
            ("t_detect", self.t_detect),
            ("t_end", self.t_end),
            ("barrier_height", self.barrier_height),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if !(self.t_end > self.t_detect) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("must exceed t_detect = {}", self.t_detect),
            });
        }
        if self.samples == 0 || self.tau_spacing == 0 {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: "sample count and tau spacing must be at least 1".into(),
            });
        }
        for (name, x) in [("detector_a", self.detector_a), ("barrier_left", self.barrier_left)] {
            grid.interior_index(x).map_err(|_| Error::InvalidParameter {
                name,
                reason: format!("{x} lies outside the grid interior"),
            })?;
        }
        if !(self.detector_a < self.barrier_left) {
            return Err(Error::InvalidParameter {
                name: "detector_a",
                reason: "passage detector must sit upstream of the barrier".into(),
            });
        }
        Ok(())
    }
}

/// Click density, sampled click times and the collapsed state at each.
#[derive(Debug, Clone)]
pub struct Passage {
    pub click: ClickDensity,
    pub nodes: Vec<ClickNode>,
    pub collapsed: Vec<WaveFunction>,
}

/// Runs the passage detector twice: once to record `N(t)` and place the
/// click-time nodes, once to capture the state at each node and collapse it.
pub fn passage(scenario: &Scenario, width: f64, detector: &Detector, samples: usize) -> Result<Passage> {
    let psi0 = scenario.initial_state()?;
    let spec = PotentialSpec::barrier_only(scenario.barrier(width)).with_detector(*detector);
    let prop = Propagator::new(psi0.grid(), &spec, &scenario.propagator_config())?;
    let (_, series) = prop.run(&psi0, scenario.t_detect, &[], true)?;
    let click = click_density(&series, &scenario.tolerances)?;
    if !click.converged {
        log::warn!(
            "passage detector (s={}, sigma={}): N(t) still changing at t={}",
            detector.s,
            detector.sigma,
            scenario.t_detect
        );
    }
    let nodes = quantile_nodes(&click, samples)?;
    let mut wanted: Vec<usize> = nodes.iter().map(|n| n.index).collect();
    wanted.sort_unstable();
    wanted.dedup();
    let last = *wanted.last().ok_or(Error::EmptyEnsemble)?;
    let mut snapshots: Vec<Option<WaveFunction>> = vec![None; wanted.len()];
    let mut state = psi0.clone();
    let mut cursor = 0;
    prop.evolve(&mut state, last, |k, s, _| {
        if cursor < wanted.len() && wanted[cursor] == k {
            snapshots[cursor] = Some(s.clone());
            cursor += 1;
        }
    });
    let collapsed = nodes
        .iter()
        .map(|n| {
            let slot = wanted.binary_search(&n.index).map_err(|_| Error::EmptyEnsemble)?;
            let psi = snapshots[slot].as_ref().ok_or(Error::EmptyEnsemble)?;
            let out = collapse(psi, detector, &scenario.tolerances)?;
            log::debug!("click at t_a={:.4} (step {}), weight {:.4}", n.t_a, n.index, n.weight);
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Passage {
        click,
        nodes,
        collapsed,
    })
}

/// Momentum moments and transmission split of one collapsed state.
#[derive(Debug, Clone, Copy)]
struct Spectrum {
    mean: f64,
    second: f64,
    /// `Σ|φ(k)|^2 T(k)` over `k` above and below the barrier top.
    above: f64,
    below: f64,
}

fn spectrum(psi: &WaveFunction, v0: f64, width: f64) -> Result<Spectrum> {
    let dist = MomentumDistribution::of(psi);
    let total = dist.total();
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let k_top = (2.0 * v0).sqrt();
    let (mut above, mut below) = (0.0, 0.0);
    for (k, w) in dist.k.iter().zip(&dist.weight) {
        if *k > 0.0 {
            let t = w * square_barrier(0.5 * k * k, v0, width);
            if *k > k_top {
                above += t;
            } else {
                below += t;
            }
        }
    }
    Ok(Spectrum {
        mean: dist.expect(|k| k),
        second: dist.expect(|k| k * k),
        above: above / total,
        below: below / total,
    })
}

/// Momentum statistics of the detected ensemble.
pub fn detected_momentum(passage: &Passage) -> Result<(f64, f64)> {
    let samples = passage
        .collapsed
        .iter()
        .zip(&passage.nodes)
        .map(|(psi, n)| {
            let sp = spectrum(psi, 0.0, 0.0)?;
            Ok(ClickSample {
                t_a: n.t_a,
                weight: n.weight,
                momentum: (sp.mean, sp.second),
                transmittance: 0.0,
                arrival: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    dq_momentum_stats(&samples)
}

/// One detector's traversal-time statistics at one barrier width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub efficiency: f64,
    pub converged: bool,
    pub traversal: TraversalResult,
    pub p_b_given_a: f64,
    /// Largest clipped-backflow fraction among branches with an arrival density.
    pub clip_frac: f64,
    /// Largest `|∫J dt - ΔN_beyond_b|` over all branches.
    pub flux_norm_gap: f64,
    /// Transmitting branches whose flux at b had not decayed by `t_end`.
    pub undecayed: usize,
    /// Share of the transmitted probability carried by momenta above the
    /// barrier top, from the stationary transmission of each branch spectrum.
    pub above_barrier_fraction: f64,
    pub t_a: Vec<f64>,
    pub transmittance: Vec<f64>,
}

/// Full pipeline for one detector: passage, collapse, branch propagation
/// with the detector off, and the traversal-time mixture.
pub fn detector_pipeline(
    scenario: &Scenario,
    width: f64,
    detector: &Detector,
    samples: usize,
    branch_prop: &Propagator,
) -> Result<BranchSummary> {
    let tol = &scenario.tolerances;
    let pass = passage(scenario, width, detector, samples)?;
    let grid = *branch_prop.grid();
    let b = scenario.barrier_left + width;
    let b_index = grid.interior_index(b)?;
    let outcomes = propagate_branches(branch_prop, &pass.collapsed, b_index, scenario.t_end, tol)?;
    let mut samples_out = Vec::with_capacity(outcomes.len());
    let (mut clip, mut gap, mut undecayed) = (0.0f64, 0.0f64, 0);
    let (mut above, mut below) = (0.0, 0.0);
    for ((out, node), psi) in outcomes.iter().zip(&pass.nodes).zip(&pass.collapsed) {
        let sp = spectrum(psi, scenario.barrier_height, width)?;
        above += node.weight * sp.above;
        below += node.weight * sp.below;
        gap = gap.max((out.transmittance_flux - out.transmittance_norm).abs());
        let arrival = if out.transmittance() > tol.zero_transmission {
            if !out.flux_decayed {
                undecayed += 1;
            }
            let a = out.arrival(tol)?;
            clip = clip.max(a.clipped_fraction);
            Some(a)
        } else {
            None
        };
        log::debug!(
            "branch t_a={:.4}: T_flux={:.6e} T_norm={:.6e}",
            node.t_a,
            out.transmittance_flux,
            out.transmittance_norm
        );
        samples_out.push(ClickSample {
            t_a: node.t_a,
            weight: node.weight,
            momentum: (sp.mean, sp.second),
            transmittance: out.transmittance(),
            arrival,
        });
    }
    let h_tau = scenario.tau_spacing as f64 * scenario.dt;
    let first_click = pass.nodes.iter().map(|n| n.t_a).fold(f64::INFINITY, f64::min);
    let grid_tau = tau_grid(((scenario.t_end - first_click) / h_tau).ceil() * h_tau, h_tau);
    let traversal = traversal_distribution(&samples_out, &grid_tau)?;
    Ok(BranchSummary {
        efficiency: pass.click.efficiency,
        converged: pass.click.converged,
        p_b_given_a: p_b_given_a(&samples_out)?,
        traversal,
        clip_frac: clip,
        flux_norm_gap: gap,
        undecayed,
        above_barrier_fraction: if above + below > 0.0 {
            above / (above + below)
        } else {
            0.0
        },
        t_a: pass.nodes.iter().map(|n| n.t_a).collect(),
        transmittance: samples_out.iter().map(|s| s.transmittance).collect(),
    })
}

/// `tau_T` from a detector-free run with probes at `a` and `b`.
pub fn two_flux_time(scenario: &Scenario, prop: &Propagator, width: f64) -> Result<f64> {
    let psi0 = scenario.initial_state()?;
    let a = scenario.detector_a;
    let b = scenario.barrier_left + width;
    let (_, series) = prop.run(&psi0, scenario.t_end, &[a, b], false)?;
    let t_c = select_t_c(&series, a)?;
    tau_t(&series, a, b, t_c)
}

fn status_of(failures: &[(&str, Error)]) -> String {
    if failures.is_empty() {
        "ok".into()
    } else {
        failures
            .iter()
            .map(|(what, e)| format!("{what}:{}", e.code()))
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter {
            name: "workers",
            reason: e.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Row {
    pub s: f64,
    pub sigma: f64,
    pub dq_mean_p: f64,
    pub delta_dq: f64,
    pub efficiency: f64,
    pub converged: bool,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Result {
    pub scenario: Scenario,
    /// Momentum width of the prepared ensemble, the reference line.
    pub delta_p: f64,
    pub rows: Vec<Figure1Row>,
}

/// `13` log-spaced detector widths on `[0.2, 5]`.
pub fn default_sigmas() -> Vec<f64> {
    log_space(0.2, 5.0, 13)
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Barrier widths `0.25, 0.5, ..., 6`.
pub fn default_widths() -> Vec<f64> {
    (1..=24).map(|k| 0.25 * k as f64).collect()
}

fn figure1_row(scenario: &Scenario, s: f64, sigma: f64) -> Figure1Row {
    let det = scenario.detector(s, sigma);
    let mut row = Figure1Row {
        s,
        sigma,
        dq_mean_p: f64::NAN,
        delta_dq: f64::NAN,
        efficiency: f64::NAN,
        converged: false,
        status: "ok".into(),
    };
    let result = passage(scenario, scenario.barrier_width, &det, scenario.samples).and_then(|p| {
        row.efficiency = p.click.efficiency;
        row.converged = p.click.converged;
        detected_momentum(&p)
    });
    match result {
        Ok((m, d)) => {
            row.dq_mean_p = m;
            row.delta_dq = d;
            if !row.converged {
                row.status = "unconverged".into();
            }
        }
        Err(e) => {
            log::warn!("figure1 s={s} sigma={sigma}: {e}");
            row.status = status_of(&[("dq", e)]);
        }
    }
    row
}

/// Momentum spread after detection for every `(s, sigma)` pair.
pub fn run_figure1(
    scenario: &Scenario,
    s_values: &[f64],
    sigma_values: &[f64],
    workers: usize,
) -> Result<Figure1Result> {
    scenario.validate()?;
    let jobs: Vec<(f64, f64)> = s_values
        .iter()
        .flat_map(|&s| sigma_values.iter().map(move |&sg| (s, sg)))
        .collect();
    let rows = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(s, sigma)| figure1_row(scenario, s, sigma))
            .collect()
    });
    Ok(Figure1Result {
        scenario: scenario.clone(),
        delta_p: scenario.delta_p(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure2Row {
    pub d: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau_t: f64,
    pub p_b_given_a_1: f64,
    pub p_b_given_a_2: f64,
    pub clip_frac_1: f64,
    pub clip_frac_2: f64,
    pub status: String,
    pub efficiency_1: f64,
    pub efficiency_2: f64,
    pub flux_norm_gap_1: f64,
    pub flux_norm_gap_2: f64,
    pub undecayed_1: usize,
    pub undecayed_2: usize,
    pub above_barrier_fraction_1: f64,
    pub above_barrier_fraction_2: f64,
    pub included_weight_1: f64,
    pub included_weight_2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure2Result {
    pub scenario: Scenario,
    pub detector_1: Detector,
    pub detector_2: Detector,
    pub rows: Vec<Figure2Row>,
}

fn figure2_row(scenario: &Scenario, d: f64, det1: &Detector, det2: &Detector) -> Figure2Row {
    let mut row = Figure2Row {
        d,
        tau1: f64::NAN,
        tau2: f64::NAN,
        tau_t: f64::NAN,
        p_b_given_a_1: f64::NAN,
        p_b_given_a_2: f64::NAN,
        clip_frac_1: f64::NAN,
        clip_frac_2: f64::NAN,
        status: String::new(),
        efficiency_1: f64::NAN,
        efficiency_2: f64::NAN,
        flux_norm_gap_1: f64::NAN,
        flux_norm_gap_2: f64::NAN,
        undecayed_1: 0,
        undecayed_2: 0,
        above_barrier_fraction_1: f64::NAN,
        above_barrier_fraction_2: f64::NAN,
        included_weight_1: f64::NAN,
        included_weight_2: f64::NAN,
    };
    let mut failures: Vec<(&str, Error)> = Vec::new();
    let prop = scenario.grid().and_then(|g| {
        let spec = PotentialSpec::barrier_only(scenario.barrier(d));
        Propagator::new(&g, &spec, &scenario.propagator_config())
    });
    let prop = match prop {
        Ok(p) => p,
        Err(e) => {
            row.status = status_of(&[("setup", e)]);
            return row;
        }
    };
    match detector_pipeline(scenario, d, det1, scenario.samples, &prop) {
        Ok(r) => {
            row.tau1 = r.traversal.mean_tau;
            row.p_b_given_a_1 = r.p_b_given_a;
            row.clip_frac_1 = r.clip_frac;
            row.efficiency_1 = r.efficiency;
            row.flux_norm_gap_1 = r.flux_norm_gap;
            row.undecayed_1 = r.undecayed;
            row.above_barrier_fraction_1 = r.above_barrier_fraction;
            row.included_weight_1 = r.traversal.included_weight;
        }
        Err(e) => failures.push(("tau1", e)),
    }
    match detector_pipeline(scenario, d, det2, scenario.samples, &prop) {
        Ok(r) => {
            row.tau2 = r.traversal.mean_tau;
            row.p_b_given_a_2 = r.p_b_given_a;
            row.clip_frac_2 = r.clip_frac;
            row.efficiency_2 = r.efficiency;
            row.flux_norm_gap_2 = r.flux_norm_gap;
            row.undecayed_2 = r.undecayed;
            row.above_barrier_fraction_2 = r.above_barrier_fraction;
            row.included_weight_2 = r.traversal.included_weight;
        }
        Err(e) => failures.push(("tau2", e)),
    }
    match two_flux_time(scenario, &prop, d) {
        Ok(t) => row.tau_t = t,
        Err(e) => failures.push(("tau_t", e)),
    }
    for (what, e) in &failures {
        log::warn!("figure2 d={d} {what}: {e}");
    }
    row.status = status_of(&failures);
    row
}

/// Mean traversal times for two passage detectors and `tau_T` at each width.
pub fn run_figure2(
    scenario: &Scenario,
    d_values: &[f64],
    detectors: [(f64, f64); 2],
    workers: usize,
) -> Result<Figure2Result> {
    scenario.validate()?;
    let det1 = scenario.detector(detectors[0].0, detectors[0].1);
    let det2 = scenario.detector(detectors[1].0, detectors[1].1);
    let rows = pool(workers)?.install(|| {
        d_values
            .par_iter()
            .map(|&d| figure2_row(scenario, d, &det1, &det2))
            .collect()
    });
    Ok(Figure2Result {
        scenario: scenario.clone(),
        detector_1: det1,
        detector_2: det2,
        rows,
    })
}

/// Traversal-time density for one barrier width and one passage detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleResult {
    pub scenario: Scenario,
    pub d: f64,
    pub detector: Detector,
    pub summary: BranchSummary,
    pub tau_t: Option<f64>,
}

pub fn run_single(scenario: &Scenario, d: f64, s: f64, sigma: f64) -> Result<SingleResult> {
    scenario.validate()?;
    let det = scenario.detector(s, sigma);
    let grid = scenario.grid()?;
    let prop = Propagator::new(
        &grid,
        &PotentialSpec::barrier_only(scenario.barrier(d)),
        &scenario.propagator_config(),
    )?;
    let summary = detector_pipeline(scenario, d, &det, scenario.samples, &prop)?;
    let tau_t = match two_flux_time(scenario, &prop, d) {
        Ok(t) => Some(t),
        Err(e) => {
            log::warn!("tau_T unavailable: {e}");
            None
        }
    };
    Ok(SingleResult {
        scenario: scenario.clone(),
        d,
        detector: det,
        summary,
        tau_t,
    })
}

/// Full-precision number formatting for the CSV outputs.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub const FIGURE1_HEADER: [&str; 6] = ["s", "sigma", "dq_mean_p", "delta_dq", "efficiency", "status"];
pub const FIGURE2_HEADER: [&str; 9] = [
    "d",
    "tau1",
    "tau2",
    "tau_T",
    "p_b_given_a_1",
    "p_b_given_a_2",
    "clip_frac_1",
    "clip_frac_2",
    "status",
];

/// Metadata written next to every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub scenario: &'a Scenario,
    pub dx: f64,
    pub extra: T,
}

fn write_sidecar<T: Serialize>(path: &Path, command: &str, scenario: &Scenario, extra: T) -> Result<()> {
    let sidecar = Sidecar {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        scenario,
        dx: scenario.grid()?.dx(),
        extra,
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &sidecar)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// `figure1.csv` and `figure1.json` in `dir`.
pub fn write_figure1(result: &Figure1Result, dir: &Path) -> Result<()> {
    write_csv(
        &dir.join("figure1.csv"),
        &FIGURE1_HEADER,
        result.rows.iter().map(|r| {
            vec![
                fmt_num(r.s),
                fmt_num(r.sigma),
                fmt_num(r.dq_mean_p),
                fmt_num(r.delta_dq),
                fmt_num(r.efficiency),
                r.status.clone(),
            ]
        }),
    )?;
    #[derive(Serialize)]
    struct Extra<'a> {
        delta_p: f64,
        rows: &'a [Figure1Row],
    }
    write_sidecar(
        &dir.join("figure1.json"),
        "figure1",
        &result.scenario,
        Extra {
            delta_p: result.delta_p,
            rows: &result.rows,
        },
    )
}

/// `figure2.csv` and `figure2.json` in `dir`.
pub fn write_figure2(result: &Figure2Result, dir: &Path) -> Result<()> {
    write_csv(
        &dir.join("figure2.csv"),
        &FIGURE2_HEADER,
        result.rows.iter().map(|r| {
            vec![
                fmt_num(r.d),
                fmt_num(r.tau1),
                fmt_num(r.tau2),
                fmt_num(r.tau_t),
                fmt_num(r.p_b_given_a_1),
                fmt_num(r.p_b_given_a_2),
                fmt_num(r.clip_frac_1),
                fmt_num(r.clip_frac_2),
                r.status.clone(),
            ]
        }),
    )?;
    #[derive(Serialize)]
    struct Extra<'a> {
        detector_1: &'a Detector,
        detector_2: &'a Detector,
        rows: &'a [Figure2Row],
    }
    write_sidecar(
        &dir.join("figure2.json"),
        "figure2",
        &result.scenario,
        Extra {
            detector_1: &result.detector_1,
            detector_2: &result.detector_2,
            rows: &result.rows,
        },
    )
}

/// `single.csv` (`tau,density`) and `single.json` in `dir`.
pub fn write_single(result: &SingleResult, dir: &Path) -> Result<()> {
    let tr = &result.summary.traversal;
    write_csv(
        &dir.join("single.csv"),
        &["tau", "density"],
        tr.tau_grid
            .iter()
            .zip(&tr.density)
            .map(|(t, d)| vec![fmt_num(*t), fmt_num(*d)]),
    )?;
    #[derive(Serialize)]
    struct Extra<'a> {
        d: f64,
        detector: &'a Detector,
        mean_tau: f64,
        tau_t: Option<f64>,
        p_b_given_a: f64,
        efficiency: f64,
        converged: bool,
        clip_frac: f64,
        flux_norm_gap: f64,
        undecayed: usize,
        above_barrier_fraction: f64,
        included_weight: f64,
        t_a: &'a [f64],
        transmittance: &'a [f64],
    }
    let s = &result.summary;
    write_sidecar(
        &dir.join("single.json"),
        "single",
        &result.scenario,
        Extra {
            d: result.d,
            detector: &result.detector,
            mean_tau: tr.mean_tau,
            tau_t: result.tau_t,
            p_b_given_a: s.p_b_given_a,
            efficiency: s.efficiency,
            converged: s.converged,
            clip_frac: s.clip_frac,
            flux_norm_gap: s.flux_norm_gap,
            undecayed: s.undecayed,
            above_barrier_fraction: s.above_barrier_fraction,
            included_weight: tr.included_weight,
            t_a: &s.t_a,
            transmittance: &s.transmittance,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_defaults() {
        let s = default_sigmas();
        assert_eq!(s.len(), 13);
        assert!((s[0] - 0.2).abs() < 1e-12 && (s[12] - 5.0).abs() < 1e-12);
        assert!(s.iter().any(|v| (v - 1.0).abs() < 1e-12));
        let d = default_widths();
        assert_eq!(d.len(), 24);
        assert_eq!(d[23], 6.0);
    }

    #[test]
    fn scenario_defaults_validate() {
        let sc = Scenario::default();
        sc.validate().unwrap();
        assert!((sc.delta_p() - 1.0 / 3.0).abs() < 1e-15);
        let bad = Scenario {
            detector_a: 90.0,
            ..Scenario::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn status_codes() {
        assert_eq!(status_of(&[]), "ok");
        assert_eq!(
            status_of(&[
                ("tau1", Error::AllReflected),
                ("tau_t", Error::NonpositiveDenominator(0.0))
            ]),
            "tau1:all-reflected;tau_t:nonpositive-denominator"
        );
    }

    #[test]
    fn number_format_round_trips() {
        for v in [1.0 / 3.0, -2.5e-17, 8.0, f64::MIN_POSITIVE] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }
}
