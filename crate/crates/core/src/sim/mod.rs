//! Seeded, deterministic synthesis of measurement campaigns.

pub mod capacitance;
pub mod deflection;
pub mod noise;
pub mod plan;
pub mod rng;
pub mod scan;
pub mod spectrum;

pub use capacitance::{capacitance_at_tilt, map_capacitance, BRIDGE_RESOLUTION};
pub use deflection::{run_deflection_sweep, DeflectionReading, DeflectionSweep};
pub use noise::{DriftConfig, NoiseConfig};
pub use plan::{ScanPlan, ScanStep, DEFAULT_ACQUISITION_BUDGET};
pub use scan::{run_gap_scan, MeasurementRun, ScanPoint};
pub use spectrum::{synthesize_spectrum, SpectrumRecord};
