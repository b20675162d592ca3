//! Simulation of molecular matter-wave diffraction at a thin grating made
//! of a standing light wave.
//!
//! The light field imprints a complex phase on the molecules: the real part
//! of the polarizability gives a coherent dipole phase grating, the imaginary
//! part Poissonian photon absorption. Each absorbed-photon channel is
//! propagated to the detector and the channels are summed incoherently,
//! along with source points, velocities and heights in the beam.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamline;
pub mod config;
pub mod distributions;
pub mod error;
pub mod grating;
pub mod run;
pub mod special;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
