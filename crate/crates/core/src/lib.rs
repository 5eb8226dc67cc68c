//! Forward simulation and inverse analysis of ultrafast, optically detected
//! electron-spin free induction decay in molecular solutions.
//!
//! The crate is organised bottom-up:
//!
//! * [`physics`]: Larmor, resonance, Boltzmann and rotational-diffusion arithmetic.
//! * [`dynamics`]: Bloch-ensemble simulation of time-resolved Faraday ellipticity traces.
//! * [`signal_chain`]: PEM helicity sequencing and pump-odd demodulation.
//! * [`fit`]: Levenberg–Marquardt fitting with the damped-cosine and EPR models.
//! * [`analysis`]: field sweeps, viscosity sensing, T1 extrapolation, detection limits.
//! * [`io`]: trace and raw-shot CSV files, SVG figures and atomic writes.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod io;
pub mod physics;
mod rng;
pub mod signal_chain;
pub mod trace;

pub use error::{Error, Result};
pub use trace::TraceSeries;
