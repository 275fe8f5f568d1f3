//! Crank-Nicolson (Cayley) propagation of the effective Hamiltonian
//! `H = -1/2 d^2/dx^2 + V(x) + Λ(x)` with hard walls at the grid ends.
//!
//! Each step solves `(1 + i dt H / 2) psi' = (1 - i dt H / 2) psi` with the
//! three-point Laplacian. The LHS is factored once per potential. Only the
//! part of the lattice where the state is non-negligible is swept: the
//! active window grows whenever amplitude above [`EDGE_AMPLITUDE`] reaches
//! within [`EDGE_MARGIN`] points of its ends, and amplitude outside it is
//! held at exactly zero.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::observables::{norm_of, MomentumDistribution};
use crate::potential::{evaluate_potential, PotentialSpec};
use crate::tridiag::Factored;
use crate::wave::WaveFunction;

pub const EDGE_AMPLITUDE: f64 = 1e-15;
pub const EDGE_MARGIN: usize = 64;
const GROW_CHUNK: usize = 512;

/// Boundary-zone mass fraction above which a run is flagged as contaminated.
pub const BOUNDARY_WARN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Boundary {
    #[default]
    HardWall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub boundary: Boundary,
    pub resolution_check: bool,
    /// Accuracy guideline `dt <= C dx^2`; exceeding it is logged, not fatal.
    pub dt_dx2_limit: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: 0.002,
            boundary: Boundary::HardWall,
            resolution_check: true,
            dt_dx2_limit: 4.0,
        }
    }
}

impl PropagatorConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }
}

/// Largest `|k| dx` treated as resolved, and the spectral mass allowed above it.
pub const RESOLVED_PHASE: f64 = 1.0;
pub const UNRESOLVED_MASS: f64 = 1e-6;

/// Fails when more than [`UNRESOLVED_MASS`] of the momentum distribution sits
/// at `|k| dx > RESOLVED_PHASE`.
pub fn check_resolution(psi: &WaveFunction) -> Result<()> {
    let dx = psi.grid().dx();
    let dist = MomentumDistribution::of(psi);
    let fast = dist.fraction(|k| k.abs() * dx > RESOLVED_PHASE);
    if fast > UNRESOLVED_MASS {
        return Err(Error::Resolution(format!(
            "{fast:e} of the momentum distribution has |k| dx > {RESOLVED_PHASE}"
        )));
    }
    Ok(())
}

/// Flux record at one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxProbe {
    /// Probe position after snapping to the grid.
    pub x: f64,
    pub index: usize,
    pub flux: Vec<f64>,
}

/// Per-step record of a propagation run. Sample 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSeries {
    pub times: Vec<f64>,
    pub norm: Option<Vec<f64>>,
    pub probes: Vec<FluxProbe>,
    /// Lattice spacing of the run; probes are snapped to this grid.
    pub dx: f64,
    pub dt_over_dx2: f64,
    pub max_boundary_mass: f64,
}

impl DetectionSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    /// Flux series of the probe closest to `x`.
    pub fn probe(&self, x: f64) -> Result<&FluxProbe> {
        self.probes
            .iter()
            .min_by(|a, b| (a.x - x).abs().total_cmp(&(b.x - x).abs()))
            .filter(|p| (p.x - x).abs() <= 0.5 * self.dx + 1e-9)
            .ok_or(Error::MissingProbe(x))
    }

    pub fn boundary_contaminated(&self) -> bool {
        self.max_boundary_mass > BOUNDARY_WARN
    }

    /// Checks the shape invariants: equal lengths and strictly increasing times.
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if let Some(norm) = &self.norm {
            if norm.len() != n {
                return Err(Error::Series("norm length mismatch".into()));
            }
        }
        if self.probes.iter().any(|p| p.flux.len() != n) {
            return Err(Error::Series("flux length mismatch".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Series("times not strictly increasing".into()));
        }
        Ok(())
    }
}

/// Flux record at one lattice point that conserves probability exactly under
/// the Crank-Nicolson step. Each step contributes the central-difference
/// current of the time-centred state `(psi^n + psi^{n+1}) / 2`; the value
/// reported at an interior step is the mean of the two adjacent half-step
/// currents, the end samples are instantaneous.
#[derive(Debug, Clone)]
pub(crate) struct CentredFlux {
    dx: f64,
    prev: [Complex64; 3],
    first: f64,
    half: Vec<f64>,
}

impl CentredFlux {
    pub(crate) fn new(triple: [Complex64; 3], dx: f64, capacity: usize) -> Self {
        Self {
            dx,
            prev: triple,
            first: triple_flux(&triple, dx),
            half: Vec::with_capacity(capacity),
        }
    }

    pub(crate) fn push(&mut self, triple: [Complex64; 3]) {
        let mid = [
            0.5 * (self.prev[0] + triple[0]),
            0.5 * (self.prev[1] + triple[1]),
            0.5 * (self.prev[2] + triple[2]),
        ];
        self.half.push(triple_flux(&mid, self.dx));
        self.prev = triple;
    }

    pub(crate) fn finish(self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.half.len() + 1);
        out.push(self.first);
        for w in self.half.windows(2) {
            out.push(0.5 * (w[0] + w[1]));
        }
        if !self.half.is_empty() {
            out.push(triple_flux(&self.prev, self.dx));
        }
        out
    }
}

#[inline]
fn triple_flux(t: &[Complex64; 3], dx: f64) -> f64 {
    (t[1].conj() * (t[2] - t[0])).im / (2.0 * dx)
}

/// Inclusive range of lattice indices currently being propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub lo: usize,
    pub hi: usize,
}

/// Number of states advanced together by [`Propagator::evolve_batch`].
pub const LANES: usize = 8;

/// One lattice point of a batch: real and imaginary parts per lane.
#[derive(Clone, Copy, Default)]
struct Lanes {
    re: [f64; LANES],
    im: [f64; LANES],
}

/// Storage for up to [`LANES`] states, one [`Lanes`] block per lattice point.
struct Batch {
    x: Vec<Lanes>,
    y: Vec<Lanes>,
    starts: Vec<f64>,
}

impl Batch {
    fn pack(states: &[WaveFunction], n: usize) -> Self {
        let mut x = vec![Lanes::default(); n];
        for (k, s) in states.iter().enumerate() {
            for (p, z) in x.iter_mut().zip(s.amplitudes()) {
                p.re[k] = z.re;
                p.im[k] = z.im;
            }
        }
        Self {
            x,
            y: vec![Lanes::default(); n],
            starts: states.iter().map(|s| s.time()).collect(),
        }
    }

    fn zero_outside(&mut self, w: Window) {
        self.x[..w.lo].fill(Lanes::default());
        self.x[w.hi + 1..].fill(Lanes::default());
    }

    fn unpack(&self, states: &mut [WaveFunction], elapsed: f64) {
        for (k, s) in states.iter_mut().enumerate() {
            let time = self.starts[k] + elapsed;
            for (z, p) in s.amplitudes_mut().iter_mut().zip(&self.x) {
                *z = Complex64::new(p.re[k], p.im[k]);
            }
            s.set_time(time);
        }
    }
}

/// Read access to one batch of states during [`Propagator::evolve_batch`].
pub struct BatchView<'a> {
    batch: &'a Batch,
    offset: usize,
    elapsed: f64,
    window: Window,
}

impl BatchView<'_> {
    /// Indices (into the slice passed to `evolve_batch`) of the states held.
    pub fn states(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.batch.starts.len()
    }

    /// Clock of state `state`.
    pub fn time(&self, state: usize) -> f64 {
        self.batch.starts[state - self.offset] + self.elapsed
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Amplitude of state `state` at lattice point `i`.
    #[inline]
    pub fn amplitude(&self, state: usize, i: usize) -> Complex64 {
        let k = state - self.offset;
        let p = &self.batch.x[i];
        Complex64::new(p.re[k], p.im[k])
    }

    /// Amplitudes at `i - 1`, `i`, `i + 1`.
    #[inline]
    pub fn triple(&self, state: usize, i: usize) -> [Complex64; 3] {
        [
            self.amplitude(state, i - 1),
            self.amplitude(state, i),
            self.amplitude(state, i + 1),
        ]
    }

    /// Trapezoid norm of state `state` over lattice points `from..`.
    pub fn norm_from(&self, state: usize, from: usize, dx: f64) -> f64 {
        let k = state - self.offset;
        let lo = from.max(self.window.lo - 1);
        let hi = self.window.hi + 1;
        if lo > hi {
            return 0.0;
        }
        let sq = |p: &Lanes| p.re[k] * p.re[k] + p.im[k] * p.im[k];
        let x = &self.batch.x;
        let inner: f64 = x[lo..=hi].iter().map(sq).sum();
        let edge = if lo == from { 0.5 * sq(&x[from]) } else { 0.0 };
        dx * (inner - edge)
    }

    /// Instantaneous central-difference flux of state `state` at point `i`.
    #[inline]
    pub fn flux(&self, state: usize, i: usize, dx: f64) -> f64 {
        triple_flux(&self.triple(state, i), dx)
    }
}

/// Crank-Nicolson stepper for one (grid, potential, dt).
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Grid,
    dt: f64,
    cfg: PropagatorConfig,
    /// `dt / (4 dx^2)`; the off-diagonals are `∓ i c`.
    c: f64,
    /// `1 - i dt/2 (1/dx^2 + V_i)`, indexed by lattice point.
    rhs_diag: Vec<Complex64>,
    /// Factors of the interior rows `1..n-1`, indexed by lattice point - 1.
    lhs: Factored,
}

impl Propagator {
    pub fn new(grid: &Grid, spec: &PotentialSpec, cfg: &PropagatorConfig) -> Result<Self> {
        spec.validate()?;
        if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {}", cfg.dt),
            });
        }
        let dx = grid.dx();
        let dt = cfg.dt;
        let ratio = dt / (dx * dx);
        if ratio > cfg.dt_dx2_limit {
            log::warn!("dt/dx^2 = {ratio:.3} exceeds the configured limit {}", cfg.dt_dx2_limit);
        }
        let v = evaluate_potential(spec, grid);
        let kin = 1.0 / (dx * dx);
        let half = Complex64::new(0.0, 0.5 * dt);
        let rhs_diag: Vec<Complex64> = v.iter().map(|vi| 1.0 - half * (kin + vi)).collect();
        let n = grid.n_points();
        let lhs_diag: Vec<Complex64> = v[1..n - 1].iter().map(|vi| 1.0 + half * (kin + vi)).collect();
        let c = dt / (4.0 * dx * dx);
        let lhs = Factored::new(&lhs_diag, Complex64::new(0.0, -c))?;
        Ok(Self {
            grid: *grid,
            dt,
            cfg: *cfg,
            c,
            rhs_diag,
            lhs,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Smallest window holding all amplitude above the edge threshold, padded.
    pub fn initial_window(&self, psi: &WaveFunction) -> Window {
        let n = self.grid.n_points();
        let a = psi.amplitudes();
        let thr = EDGE_AMPLITUDE * EDGE_AMPLITUDE;
        let first = a.iter().position(|z| z.norm_sqr() > thr);
        let last = a.iter().rposition(|z| z.norm_sqr() > thr);
        match (first, last) {
            (Some(f), Some(l)) => Window {
                lo: f.saturating_sub(GROW_CHUNK).max(1),
                hi: (l + GROW_CHUNK).min(n - 2),
            },
            _ => Window { lo: 1, hi: 1 },
        }
    }

    fn full_window(&self) -> Window {
        Window {
            lo: 1,
            hi: self.grid.n_points() - 2,
        }
    }

    /// One step over the whole lattice.
    pub fn step(&self, psi: &mut WaveFunction) {
        let w = self.full_window();
        let mut y = vec![Complex64::new(0.0, 0.0); self.grid.n_points()];
        self.step_window(psi.amplitudes_mut(), w, &mut y);
        psi.set_time(psi.time() + self.dt);
    }

    fn step_window(&self, a: &mut [Complex64], w: Window, y: &mut [Complex64]) {
        let c = self.c;
        let inv = &self.lhs.inv_pivot;
        let up = &self.lhs.upper;
        // forward sweep fused with the explicit half step
        let mut prev = Complex64::new(0.0, 0.0);
        let mut left = a[w.lo - 1];
        let mut mid = a[w.lo];
        for i in w.lo..=w.hi {
            let right = a[i + 1];
            let s = left + right;
            // rhs = d_i mid + i c (left + right)
            let r = self.rhs_diag[i] * mid + Complex64::new(-c * s.im, c * s.re);
            // y_i = (rhs - (-i c) y_{i-1}) / pivot
            let t = r + Complex64::new(-c * prev.im, c * prev.re);
            prev = t * inv[i - 1];
            y[i] = prev;
            left = mid;
            mid = right;
        }
        let mut next = Complex64::new(0.0, 0.0);
        for i in (w.lo..=w.hi).rev() {
            next = y[i] - up[i - 1] * next;
            a[i] = next;
        }
    }

    /// Widen `w` when amplitude has crept up to its edges.
    fn adapt(&self, a: &[Complex64], w: &mut Window) {
        let thr = EDGE_AMPLITUDE * EDGE_AMPLITUDE;
        let n = self.grid.n_points();
        if w.lo > 1 {
            let end = (w.lo + EDGE_MARGIN).min(w.hi + 1);
            if a[w.lo..end].iter().any(|z| z.norm_sqr() > thr) {
                w.lo = w.lo.saturating_sub(GROW_CHUNK).max(1);
            }
        }
        if w.hi < n - 2 {
            let start = w.hi.saturating_sub(EDGE_MARGIN).max(w.lo);
            if a[start..=w.hi].iter().any(|z| z.norm_sqr() > thr) {
                w.hi = (w.hi + GROW_CHUNK).min(n - 2);
            }
        }
    }

    /// Advance `n_steps`, calling `observer(k, psi, window)` before the first
    /// step (`k = 0`) and after each step `k = 1..=n_steps`.
    pub fn evolve<F>(&self, psi: &mut WaveFunction, n_steps: usize, mut observer: F)
    where
        F: FnMut(usize, &WaveFunction, Window),
    {
        let n = self.grid.n_points();
        let mut w = self.initial_window(psi);
        {
            let a = psi.amplitudes_mut();
            a[..w.lo].fill(Complex64::new(0.0, 0.0));
            a[w.hi + 1..].fill(Complex64::new(0.0, 0.0));
        }
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        let t0 = psi.time();
        observer(0, psi, w);
        for k in 1..=n_steps {
            self.step_window(psi.amplitudes_mut(), w, &mut y);
            psi.set_time(t0 + k as f64 * self.dt);
            self.adapt(psi.amplitudes(), &mut w);
            observer(k, psi, w);
        }
    }

    /// Advance several states in lock step. The states are packed eight to a
    /// batch so the independent recurrences of the Thomas sweep interleave;
    /// all states must live on this propagator's grid. Each keeps its own clock.
    /// A batch runs for the largest of its members' `steps`; states that need
    /// fewer keep stepping and the observer ignores them. `observer(k, view)`
    /// sees every state before the first step and after each step.
    pub fn evolve_batch<F>(&self, states: &mut [WaveFunction], steps: &[usize], mut observer: F)
    where
        F: FnMut(usize, &BatchView<'_>),
    {
        assert_eq!(states.len(), steps.len(), "one step count per state");
        for (chunk_idx, chunk) in states.chunks_mut(LANES).enumerate() {
            let offset = chunk_idx * LANES;
            let n_steps = steps[offset..offset + chunk.len()].iter().copied().max().unwrap_or(0);
            let mut batch = Batch::pack(chunk, self.grid.n_points());
            let mut w = chunk
                .iter()
                .map(|s| self.initial_window(s))
                .reduce(|a, b| Window {
                    lo: a.lo.min(b.lo),
                    hi: a.hi.max(b.hi),
                })
                .unwrap_or(Window { lo: 1, hi: 1 });
            batch.zero_outside(w);
            observer(
                0,
                &BatchView {
                    batch: &batch,
                    offset,
                    elapsed: 0.0,
                    window: w,
                },
            );
            for k in 1..=n_steps {
                self.step_batch(&mut batch, w);
                self.adapt_batch(&batch, &mut w);
                observer(
                    k,
                    &BatchView {
                        batch: &batch,
                        offset,
                        elapsed: k as f64 * self.dt,
                        window: w,
                    },
                );
            }
            batch.unpack(chunk, n_steps as f64 * self.dt);
        }
    }

    fn step_batch(&self, b: &mut Batch, w: Window) {
        let c = self.c;
        let inv = &self.lhs.inv_pivot[w.lo - 1..w.hi];
        let up = &self.lhs.upper[w.lo - 1..w.hi];
        let diag = &self.rhs_diag[w.lo..=w.hi];
        let xs = &b.x[w.lo - 1..=w.hi + 1];
        let ys = &mut b.y[w.lo..=w.hi];
        let mut prev = Lanes::default();
        for (((y, win), d), m) in ys.iter_mut().zip(xs.windows(3)).zip(diag).zip(inv) {
            let (l, x, r) = (&win[0], &win[1], &win[2]);
            for k in 0..LANES {
                let sre = l.re[k] + r.re[k] + prev.re[k];
                let sim = l.im[k] + r.im[k] + prev.im[k];
                let tre = d.re * x.re[k] - d.im * x.im[k] - c * sim;
                let tim = d.re * x.im[k] + d.im * x.re[k] + c * sre;
                prev.re[k] = tre * m.re - tim * m.im;
                prev.im[k] = tre * m.im + tim * m.re;
            }
            *y = prev;
        }
        let mut next = Lanes::default();
        let xs = &mut b.x[w.lo..=w.hi];
        for ((x, y), u) in xs.iter_mut().zip(&b.y[w.lo..=w.hi]).zip(up).rev() {
            for k in 0..LANES {
                let nre = y.re[k] - (u.re * next.re[k] - u.im * next.im[k]);
                let nim = y.im[k] - (u.re * next.im[k] + u.im * next.re[k]);
                next.re[k] = nre;
                next.im[k] = nim;
            }
            *x = next;
        }
    }

    fn adapt_batch(&self, b: &Batch, w: &mut Window) {
        let thr = EDGE_AMPLITUDE * EDGE_AMPLITUDE;
        let n = self.grid.n_points();
        let hot = |from: usize, to: usize| {
            b.x[from..to]
                .iter()
                .any(|p| (0..LANES).any(|k| p.re[k] * p.re[k] + p.im[k] * p.im[k] > thr))
        };
        if w.lo > 1 && hot(w.lo, (w.lo + EDGE_MARGIN).min(w.hi + 1)) {
            w.lo = w.lo.saturating_sub(GROW_CHUNK).max(1);
        }
        if w.hi < n - 2 && hot(w.hi.saturating_sub(EDGE_MARGIN).max(w.lo), w.hi + 1) {
            w.hi = (w.hi + GROW_CHUNK).min(n - 2);
        }
    }

    /// Number of steps needed to reach `t_end` from `t0`.
    pub fn steps_to(&self, t0: f64, t_end: f64) -> usize {
        ((t_end - t0) / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Propagate to `t_end` recording time, optionally the norm, and the flux
    /// at each probe after every step.
    pub fn run(
        &self,
        psi: &WaveFunction,
        t_end: f64,
        probes: &[f64],
        record_norm: bool,
    ) -> Result<(WaveFunction, DetectionSeries)> {
        if !(t_end > psi.time()) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("{t_end} is not after the state time {}", psi.time()),
            });
        }
        if psi.grid() != &self.grid {
            return Err(Error::InvalidParameter {
                name: "psi",
                reason: "state lives on a different grid".into(),
            });
        }
        if self.cfg.resolution_check {
            check_resolution(psi)?;
        }
        let probe_idx = probes
            .iter()
            .map(|&x| self.grid.interior_index(x))
            .collect::<Result<Vec<_>>>()?;
        let n_steps = self.steps_to(psi.time(), t_end);
        let mut times = Vec::with_capacity(n_steps + 1);
        let mut norm = record_norm.then(|| Vec::with_capacity(n_steps + 1));
        let dx = self.grid.dx();
        let a0 = psi.amplitudes();
        let mut fluxes: Vec<CentredFlux> = probe_idx
            .iter()
            .map(|&i| CentredFlux::new([a0[i - 1], a0[i], a0[i + 1]], dx, n_steps))
            .collect();
        let n = self.grid.n_points();
        let zone = self.grid.boundary_zone();
        let mut max_boundary: f64 = 0.0;
        let mut state = psi.clone();
        self.evolve(&mut state, n_steps, |k, s, w| {
            let a = s.amplitudes();
            times.push(s.time());
            let mut total = None;
            if let Some(nv) = norm.as_mut() {
                let v = norm_of(&a[w.lo - 1..=w.hi + 1], dx);
                nv.push(v);
                total = Some(v);
            }
            if k > 0 {
                for (f, &i) in fluxes.iter_mut().zip(&probe_idx) {
                    f.push([a[i - 1], a[i], a[i + 1]]);
                }
            }
            if w.lo <= zone || w.hi + zone >= n - 1 {
                let edge: f64 = a[..zone]
                    .iter()
                    .chain(&a[n - zone..])
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                    * dx;
                let total = total.unwrap_or_else(|| norm_of(&a[w.lo - 1..=w.hi + 1], dx));
                if total > 0.0 {
                    max_boundary = max_boundary.max(edge / total);
                }
            }
        });
        if max_boundary > BOUNDARY_WARN {
            log::warn!("boundary zone reached: mass fraction {max_boundary:e}");
        }
        let series = DetectionSeries {
            times,
            norm,
            probes: probe_idx
                .iter()
                .zip(fluxes)
                .map(|(&i, flux)| FluxProbe {
                    x: self.grid.x(i),
                    index: i,
                    flux: flux.finish(),
                })
                .collect(),
            dx,
            dt_over_dx2: self.dt / (dx * dx),
            max_boundary_mass: max_boundary,
        };
        Ok((state, series))
    }
}

/// Single Crank-Nicolson step of `psi` under `spec`.
pub fn step(psi: &WaveFunction, spec: &PotentialSpec, cfg: &PropagatorConfig) -> Result<WaveFunction> {
    if cfg.resolution_check {
        check_resolution(psi)?;
    }
    let prop = Propagator::new(psi.grid(), spec, cfg)?;
    let mut out = psi.clone();
    prop.step(&mut out);
    Ok(out)
}

/// Propagate `psi` to `t_end`; see [`Propagator::run`].
pub fn run(
    psi: &WaveFunction,
    spec: &PotentialSpec,
    cfg: &PropagatorConfig,
    t_end: f64,
    probes: &[f64],
    record_norm: bool,
) -> Result<(WaveFunction, DetectionSeries)> {
    Propagator::new(psi.grid(), spec, cfg)?.run(psi, t_end, probes, record_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::observables::{norm, position_moments};
    use crate::potential::Barrier;
    use crate::wave::{prepare_gaussian, GaussianPrep};
    use approx::assert_relative_eq;

    fn small_grid() -> Grid {
        make_grid(0.0, 100.0, 2001).unwrap()
    }

    #[test]
    fn free_norm_conserved() {
        let g = small_grid();
        let psi = prepare_gaussian(
            &g,
            &GaussianPrep {
                x0: 30.0,
                p0: 5.0,
                var_x: 2.0,
            },
        )
        .unwrap();
        let (_, s) = run(
            &psi,
            &PotentialSpec::free(),
            &PropagatorConfig::default(),
            4.0,
            &[],
            true,
        )
        .unwrap();
        let nv = s.norm.unwrap();
        assert!(nv.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(s.probes.is_empty());
    }

    #[test]
    fn only_time_column_when_nothing_recorded() {
        let g = small_grid();
        let psi = prepare_gaussian(
            &g,
            &GaussianPrep {
                x0: 30.0,
                p0: 5.0,
                var_x: 2.0,
            },
        )
        .unwrap();
        let (_, s) = run(
            &psi,
            &PotentialSpec::free(),
            &PropagatorConfig::default(),
            0.1,
            &[],
            false,
        )
        .unwrap();
        assert_eq!(s.times.len(), 51);
        assert!(s.norm.is_none());
        assert!(s.probes.is_empty());
        s.validate().unwrap();
    }

    #[test]
    fn windowed_matches_full_sweep() {
        let g = small_grid();
        let spec = PotentialSpec::barrier_only(Barrier {
            left: 50.0,
            width: 1.0,
            height: 20.0,
        });
        let prop = Propagator::new(&g, &spec, &PropagatorConfig::default()).unwrap();
        let psi = prepare_gaussian(
            &g,
            &GaussianPrep {
                x0: 40.0,
                p0: 6.0,
                var_x: 2.0,
            },
        )
        .unwrap();
        let mut full = psi.clone();
        for _ in 0..1500 {
            prop.step(&mut full);
        }
        let mut win = psi.clone();
        prop.evolve(&mut win, 1500, |_, _, _| {});
        let diff = full
            .amplitudes()
            .iter()
            .zip(win.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "max deviation {diff:e}");
        assert_relative_eq!(full.time(), win.time(), epsilon = 1e-12);
    }

    /// Crank-Nicolson lattice dispersion `w(k) = 2/dt atan(E(k) dt / 2)` with
    /// `E(k) = (1 - cos(k dx)) / dx^2`.
    fn cn_omega(k: f64, dx: f64, dt: f64) -> f64 {
        let e = (1.0 - (k * dx).cos()) / (dx * dx);
        2.0 / dt * (0.5 * e * dt).atan()
    }

    #[test]
    fn batch_matches_single() {
        let g = small_grid();
        let spec = PotentialSpec::barrier_only(Barrier {
            left: 50.0,
            width: 1.0,
            height: 20.0,
        });
        let prop = Propagator::new(&g, &spec, &PropagatorConfig::default()).unwrap();
        let states: Vec<_> = (0..11)
            .map(|j| {
                let prep = GaussianPrep {
                    x0: 30.0 + j as f64,
                    p0: 4.0 + 0.3 * j as f64,
                    var_x: 1.0 + 0.1 * j as f64,
                };
                let mut psi = prepare_gaussian(&g, &prep).unwrap();
                psi.set_time(0.1 * j as f64);
                psi
            })
            .collect();
        let mut batched = states.clone();
        let probe = g.nearest_index(51.0);
        let mut flux_seen: Vec<_> = states
            .iter()
            .map(|s| {
                let a = s.amplitudes();
                CentredFlux::new([a[probe - 1], a[probe], a[probe + 1]], g.dx(), 800)
            })
            .collect();
        prop.evolve_batch(&mut batched, &vec![800; states.len()], |k, view| {
            if k > 0 {
                for s in view.states() {
                    flux_seen[s].push(view.triple(s, probe));
                }
            }
        });
        let flux_seen: Vec<Vec<f64>> = flux_seen.into_iter().map(CentredFlux::finish).collect();
        for (j, s) in states.iter().enumerate() {
            let (single, series) = prop
                .run(s, s.time() + 800.0 * prop.dt() - 1e-12, &[g.x(probe)], false)
                .unwrap();
            let diff = single
                .amplitudes()
                .iter()
                .zip(batched[j].amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12, "state {j}: {diff:e}");
            assert_relative_eq!(single.time(), batched[j].time(), epsilon = 1e-12);
            assert_eq!(series.probes[0].flux.len(), flux_seen[j].len());
            for (a, b) in series.probes[0].flux.iter().zip(&flux_seen[j]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn free_packet_moves_classically() {
        let g = make_grid(0.0, 200.0, 8001).unwrap();
        let psi = prepare_gaussian(
            &g,
            &GaussianPrep {
                x0: 40.0,
                p0: 8.0,
                var_x: 2.25,
            },
        )
        .unwrap();
        let cfg = PropagatorConfig::default();
        let (out, _) = run(&psi, &PotentialSpec::free(), &cfg, 5.0, &[], false).unwrap();
        let (mean, var) = position_moments(&out).unwrap();
        assert_relative_eq!(mean, 40.0 + 8.0 * 5.0, max_relative = 1e-2);
        // group velocity and inverse mass of the discrete dispersion, by
        // finite differences
        let (dx, dt, h) = (g.dx(), cfg.dt, 1e-3);
        let w = |k| cn_omega(k, dx, dt);
        let v = (w(8.0 + h) - w(8.0 - h)) / (2.0 * h);
        let inv_mass = (w(8.0 + h) - 2.0 * w(8.0) + w(8.0 - h)) / (h * h);
        assert_relative_eq!(mean, 40.0 + v * 5.0, max_relative = 1e-4);
        assert_relative_eq!(var, 2.25 + (inv_mass * 5.0 / 3.0).powi(2), max_relative = 1e-3);
    }

    #[test]
    fn flat_absorber_decay() {
        let g = small_grid();
        let psi = prepare_gaussian(
            &g,
            &GaussianPrep {
                x0: 50.0,
                p0: 0.0,
                var_x: 4.0,
            },
        )
        .unwrap();
        let s = 1.3;
        let spec = PotentialSpec::free().with_flat_absorber(s);
        let (out, series) = run(&psi, &spec, &PropagatorConfig::default(), 2.0, &[], true).unwrap();
        assert_relative_eq!(norm(&out), (-s * s * 2.0f64).exp(), max_relative = 1e-5);
        let nv = series.norm.unwrap();
        assert!(nv.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn run_rejects_bad_input() {
        let g = small_grid();
        let psi = prepare_gaussian(
            &g,
            &GaussianPrep {
                x0: 50.0,
                p0: 0.0,
                var_x: 4.0,
            },
        )
        .unwrap();
        let cfg = PropagatorConfig::default();
        assert!(run(&psi, &PotentialSpec::free(), &cfg, 0.0, &[], false).is_err());
        assert!(matches!(
            run(&psi, &PotentialSpec::free(), &cfg, 1.0, &[150.0], false),
            Err(Error::ProbeOutOfRange { .. })
        ));
        let bad = PropagatorConfig::with_dt(-1.0);
        assert!(Propagator::new(&g, &PotentialSpec::free(), &bad).is_err());
    }

    #[test]
    fn unresolved_state_rejected() {
        let g = make_grid(0.0, 100.0, 501).unwrap();
        // p dx = 12 * 0.2 = 2.4 rad, outside the resolved band
        let psi = prepare_gaussian(
            &g,
            &GaussianPrep {
                x0: 50.0,
                p0: 12.0,
                var_x: 4.0,
            },
        )
        .unwrap();
        assert!(matches!(
            step(&psi, &PotentialSpec::free(), &PropagatorConfig::default()),
            Err(Error::Resolution(_))
        ));
    }
}
