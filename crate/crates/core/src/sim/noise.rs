use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stochastic ingredients of a simulated campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Statistical scatter of a fitted resonance frequency (Hz). Enters the
    /// per-point shift error as sigma(dnu2) = 2 nu0 sigma_nu.
    pub frequency_stat_sigma: f64,
    /// Detector noise floor of the interferometer spectrum (V/sqrt(Hz)).
    pub spectrum_noise_floor: f64,
    /// Peak power spectral density of the driven resonance line (V^2/Hz).
    pub spectrum_peak_psd: f64,
    /// Center of the analyzer window (Hz).
    pub spectrum_center: f64,
    /// Width of the analyzer window (Hz).
    pub spectrum_span: f64,
    /// FFT resolution bandwidth (Hz); also the spectrum bin width.
    pub resolution_bandwidth: f64,
    /// Number of rms averages the analyzer takes per spectrum.
    pub rms_averages: u32,
    /// Per-reading noise of the dc interferometer level (V).
    pub deflection_reading_sigma: f64,
    /// Random-walk step of the laser-frequency drift between consecutive
    /// dc readings (V). Defaults well above the reading noise so the
    /// alternation procedure has drift to cancel.
    pub laser_drift_step: f64,
    pub rng_seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            frequency_stat_sigma: 7e-3,
            spectrum_noise_floor: 9.0e-8,
            spectrum_peak_psd: 1.0e-12,
            spectrum_center: 138.275,
            spectrum_span: 4.0,
            resolution_bandwidth: 31.25e-3,
            rms_averages: 2,
            deflection_reading_sigma: 2.0e-3,
            laser_drift_step: 1.0e-2,
            rng_seed: 42,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frequency_stat_sigma < 0.0
            || self.spectrum_noise_floor < 0.0
            || self.spectrum_peak_psd < 0.0
            || self.deflection_reading_sigma < 0.0
            || self.laser_drift_step < 0.0
        {
            return Err(Error::Config("noise amplitudes must be >= 0".into()));
        }
        if self.resolution_bandwidth <= 0.0 || self.spectrum_span <= 0.0 {
            return Err(Error::Config(
                "resolution bandwidth and span must be positive".into(),
            ));
        }
        if self.rms_averages == 0 {
            return Err(Error::Config("rms averages must be >= 1".into()));
        }
        Ok(())
    }

    /// Per-point error on the squared-frequency shift (Hz^2), the linear
    /// propagation of the frequency scatter through nu^2 - nu0^2.
    pub fn shift_sigma(&self, nu0: f64) -> f64 {
        2.0 * nu0 * self.frequency_stat_sigma
    }
}

/// Slow drifts applied to a simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    /// Linear drift of the squared-frequency shift (Hz^2/s), applied as
    /// rate * timestamp.
    pub shift_drift_rate: f64,
    /// Shift accumulated over one run (Hz^2); descriptive companion of the
    /// rate, kept so configurations read like the quoted 0-50 Hz^2 span.
    pub total_span: f64,
    /// Slow drift of the true gap correction (m/s).
    pub thermal_d0_drift: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            shift_drift_rate: 0.0,
            total_span: 0.0,
            thermal_d0_drift: 0.0,
        }
    }
}

impl DriftConfig {
    pub fn none() -> Self {
        Self::default()
    }

    /// Drift reaching `span` Hz^2 at the end of a run of the given duration.
    pub fn from_total_span(span: f64, run_duration: f64) -> Self {
        DriftConfig {
            shift_drift_rate: if run_duration > 0.0 { span / run_duration } else { 0.0 },
            total_span: span,
            thermal_d0_drift: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.shift_drift_rate == 0.0 && self.thermal_d0_drift == 0.0
    }
}
