//! The staged end-to-end campaign: parallelize the plates, estimate the
//! offset voltage from static deflections, calibrate electrostatically,
//! then extract the Casimir coefficient with its cross-checks.

pub mod published;
pub mod report;
pub mod stages;

pub use report::{reproduce_paper, CampaignReport, ComparisonRow};
pub use stages::{
    simulate_calibration_runs, simulate_extraction_run, stage_calibrate, stage_extract_casimir,
    stage_offset_voltage, stage_parallelize, ExtractionOutcome, OffsetOutcome,
    ParallelizationOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::types::ApparatusConfig;
use crate::sim::noise::{DriftConfig, NoiseConfig};

/// Complete description of a simulated campaign. Together with a seed it
/// determines every byte of the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub apparatus: ApparatusConfig,
    pub noise: NoiseConfig,
    /// Drift injected into the (long, final) extraction scan; the three
    /// calibration scans are taken drift-free.
    pub drift: DriftConfig,
    /// Bias voltages of the four gap scans (V). Exactly one must nearly
    /// cancel the true offset voltage.
    pub bias_list_v: Vec<f64>,
    /// True-gap targets of the extraction scan (m).
    pub scan_min_gap: f64,
    pub scan_max_gap: f64,
    /// Finely spaced points from `scan_min_gap` up to `fine_upper_gap`,
    /// a coarse tail from `coarse_lower_gap` up to `scan_max_gap`.
    pub fine_points: usize,
    pub fine_upper_gap: f64,
    pub coarse_points: usize,
    pub coarse_lower_gap: f64,
    /// True-gap range and point count of each calibration scan (m).
    pub calibration_min_gap: f64,
    pub calibration_max_gap: f64,
    pub calibration_points: usize,
    /// Acquisition time per scan point (s); two rms averages at the 31.25
    /// mHz resolution bandwidth take 64 s.
    pub dwell_time: f64,
    pub acquisition_budget: f64,
    /// Nominal gap distances of the deflection (offset-voltage) stage (m).
    pub offset_distances: Vec<f64>,
    /// Bias list swept at each deflection distance (V).
    pub offset_bias_v: Vec<f64>,
    /// Plate misalignment before parallelization (rad).
    pub initial_tilt: [f64; 2],
    /// Closest-approach gap used during capacitance maximization (m).
    pub parallelization_gap: f64,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            apparatus: ApparatusConfig::default(),
            noise: NoiseConfig::default(),
            drift: DriftConfig::from_total_span(22.0, 18.0 * 64.0),
            bias_list_v: vec![-205.8e-3, -137.2e-3, 68.6e-3, -68.6e-3],
            scan_min_gap: 0.50e-6,
            scan_max_gap: 3.0e-6,
            fine_points: 9,
            fine_upper_gap: 1.1e-6,
            coarse_points: 9,
            coarse_lower_gap: 1.6e-6,
            calibration_min_gap: 2.7e-6,
            calibration_max_gap: 9.5e-6,
            calibration_points: 24,
            dwell_time: 64.0,
            acquisition_budget: 2400.0,
            offset_distances: vec![5.0e-6, 6.5e-6, 8.0e-6, 9.5e-6],
            offset_bias_v: vec![-0.25, -0.20, -0.15, -0.10, -0.05, 0.05, 0.10, 0.15],
            initial_tilt: [3.0e-4, -2.0e-4],
            parallelization_gap: 0.4e-6,
            seed: 42,
        }
    }
}

impl CampaignConfig {
    /// Index of the near-cancellation bias, judged against the true offset
    /// voltage of the configured apparatus.
    pub fn near_cancellation_index(&self) -> Result<usize> {
        let v0 = self.apparatus.offset_voltage_v0_true;
        let near: Vec<usize> = self
            .bias_list_v
            .iter()
            .enumerate()
            .filter(|(_, &v)| (v - v0).abs() < 15e-3)
            .map(|(i, _)| i)
            .collect();
        match near.as_slice() {
            [i] => Ok(*i),
            [] => Err(Error::Config(
                "bias list has no near-cancellation entry (|V_c - V_0| < 15 mV)".into(),
            )),
            _ => Err(Error::Config(
                "bias list has more than one near-cancellation entry".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.apparatus.validate()?;
        self.noise.validate()?;
        self.near_cancellation_index()?;
        if !(self.scan_min_gap > 0.0 && self.scan_min_gap < self.scan_max_gap) {
            return Err(Error::Config("scan range must be positive and increasing".into()));
        }
        if !(self.scan_min_gap < self.fine_upper_gap
            && self.fine_upper_gap <= self.coarse_lower_gap
            && self.coarse_lower_gap < self.scan_max_gap)
        {
            return Err(Error::Config(
                "scan grid must satisfy min < fine_upper <= coarse_lower < max".into(),
            ));
        }
        if !(self.calibration_min_gap > 0.0
            && self.calibration_min_gap < self.calibration_max_gap)
        {
            return Err(Error::Config("calibration range must be increasing".into()));
        }
        if self.fine_points < 2 || self.coarse_points < 2 || self.calibration_points < 4 {
            return Err(Error::Config("too few scan points".into()));
        }
        if self.offset_distances.is_empty() || self.offset_bias_v.len() < 5 {
            return Err(Error::Config(
                "offset stage needs distances and at least 5 bias values".into(),
            ));
        }
        if self.initial_tilt.iter().any(|t| t.abs() > 1e-3) {
            return Err(Error::Config(
                "initial tilt outside the +-1e-3 rad capture range".into(),
            ));
        }
        if self.dwell_time <= 0.0 || self.acquisition_budget <= 0.0 {
            return Err(Error::Config("timing must be positive".into()));
        }
        Ok(())
    }
}
