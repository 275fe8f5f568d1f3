//! Simulator for a two-detector measurement of barrier traversal times.
//!
//! A Gaussian packet is propagated through a square barrier. A passage
//! detector upstream is modelled by a complex Gaussian potential; each click
//! collapses the state by the detector profile, after which the collapsed
//! branch is propagated to an ideal arrival detector at the right barrier
//! edge. Traversal times `t_b - t_a` are collected over the doubly-detected
//! ensemble.
//!
//! Atomic units throughout (hbar = m = 1).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detectors;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod observables;
pub mod potential;
pub mod propagator;
pub mod transmission;
pub mod tridiag;
pub mod wave;

pub use error::{Error, Result};
pub use grid::{make_grid, Grid};
pub use potential::{Barrier, Detector, PotentialSpec};
pub use propagator::{DetectionSeries, Propagator, PropagatorConfig};
pub use wave::{prepare_gaussian, GaussianPrep, WaveFunction};
