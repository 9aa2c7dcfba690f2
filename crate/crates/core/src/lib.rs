//! Simulation and analysis toolkit for inline superconducting-nanowire
//! single-photon detectors on bound-state-in-the-continuum (BIC) waveguides.
//!
//! The crate is organised along the measurement chain:
//!
//! - [`bicwave`]: TM-mode leakage model of the etchless BIC waveguide and the
//!   fits that locate the BIC width and the propagation loss.
//! - [`nanowire`]: single-detector physics (absorption, bias curves, recovery
//!   waveform, jitter budget, on-chip efficiency).
//! - [`cascade`]: inline arrays of partially absorbing nanowires.
//! - [`sources`]: pulsed coherent / thermal / Fock and CW SPDC photon sources.
//! - [`simkernel`]: Monte Carlo propagation into picosecond time-tag streams,
//!   dead time, dark counts, trigger windows and tag file I/O.
//! - [`correlator`]: coincidences, start-stop histograms, g²(τ) and the
//!   heralded conditional g_c²(τ).
//! - [`pnr`]: click statistics and photon-number-resolution figures of merit.
//! - [`fitkit`]: Levenberg-Marquardt least squares and the model library.
//!
//! Units follow the field names: `_um` micrometres, `_ps` picoseconds,
//! `_hz` hertz. Time tags are integer picoseconds.

pub mod bicwave;
pub mod cascade;
pub mod correlator;
mod error;
pub mod fitkit;
pub mod nanowire;
pub mod pnr;
pub mod rng;
pub mod simkernel;
pub mod sources;

pub use error::{Error, Result};

/// 2·√(2 ln 2): ratio between the FWHM and the standard deviation of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;
