//! Digital twin of a parallel-plate Casimir-force experiment.
//!
//! The crate has four layers:
//!
//! * [`physics`] — the closed-form laws: vacuum pressure, electrostatic
//!   deflection, the squared-frequency-shift model, the gap/actuation map,
//!   wedge corrections for non-parallel plates, and the coefficient
//!   relation K_C = (eps0/4) C_Cas/C_el.
//! * [`sim`] — a seeded, deterministic generator of synthetic measurement
//!   campaigns: resonance spectra, deflection sweeps, capacitance maps and
//!   gap scans with configurable noise and drift.
//! * [`fit`] — weighted nonlinear least squares (damped Gauss-Newton),
//!   chi-squared probabilities, Lorentzian line fitting, the global
//!   electrostatic calibration, and the Casimir-coefficient extraction
//!   with its exponent, wedge and drift variants.
//! * [`pipeline`] — the staged end-to-end campaign (parallelize, offset
//!   voltage, calibrate, extract) and the report comparing recovered
//!   parameters against the published values.
//!
//! File formats and the command-line front end live in [`io`] and the
//! `casimir` binary.

pub mod error;
pub mod fit;
pub mod io;
pub mod physics;
pub mod pipeline;
pub mod sim;

pub use error::{Error, Result};
