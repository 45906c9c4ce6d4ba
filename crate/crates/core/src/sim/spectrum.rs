//! Synthesis of FFT-analyzer spectra of the interferometer signal around
//! the torsional resonance.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::noise::NoiseConfig;
use super::rng;
use crate::error::{Error, Result};

/// One averaged power spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    /// Bin center frequencies (Hz).
    pub frequencies: Vec<f64>,
    /// Averaged power spectral density per bin (V^2/Hz).
    pub power: Vec<f64>,
    /// Bin width; equals the resolution bandwidth (Hz).
    pub bin_width: f64,
    /// Number of rms averages taken.
    pub averages: u32,
    pub timestamp: f64,
}

impl SpectrumRecord {
    pub fn validate(&self) -> Result<()> {
        if self.frequencies.len() != self.power.len() {
            return Err(Error::Data("bin/power length mismatch".into()));
        }
        if self.power.iter().any(|&p| p < 0.0) {
            return Err(Error::Data("power values must be >= 0".into()));
        }
        Ok(())
    }
}

/// Synthesize the analyzer output for a driven Lorentzian line at
/// `true_freq` with full width `linewidth`.
///
/// Per bin, each rms average draws the power of the coherent line
/// amplitude plus circular complex detector noise of density
/// `spectrum_noise_floor`^2; the record stores the mean of the draws. In
/// the zero-floor limit the record equals the line shape exactly.
pub fn synthesize_spectrum(
    true_freq: f64,
    linewidth: f64,
    noise: &NoiseConfig,
    timestamp: f64,
) -> Result<SpectrumRecord> {
    noise.validate()?;
    if linewidth <= 0.0 {
        return Err(Error::Domain(format!(
            "linewidth must be positive, got {linewidth}"
        )));
    }
    let lo = noise.spectrum_center - 0.5 * noise.spectrum_span;
    let hi = noise.spectrum_center + 0.5 * noise.spectrum_span;
    if !(lo..=hi).contains(&true_freq) {
        return Err(Error::Config(format!(
            "line at {true_freq} Hz outside the analyzer window [{lo}, {hi}] Hz"
        )));
    }
    let nbins = (noise.spectrum_span / noise.resolution_bandwidth).round() as usize + 1;
    let mut stream = rng::stream(noise.rng_seed, "spectrum");
    let gauss = Normal::new(0.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let half_gamma = 0.5 * linewidth;
    let floor_psd = noise.spectrum_noise_floor * noise.spectrum_noise_floor;
    let noise_amp = (0.5 * floor_psd).sqrt();

    let mut frequencies = Vec::with_capacity(nbins);
    let mut power = Vec::with_capacity(nbins);
    for k in 0..nbins {
        let f = lo + k as f64 * noise.resolution_bandwidth;
        let x = f - true_freq;
        let line = noise.spectrum_peak_psd * half_gamma * half_gamma
            / (x * x + half_gamma * half_gamma);
        let amplitude = line.sqrt();
        let mut acc = 0.0;
        for _ in 0..noise.rms_averages {
            if noise_amp > 0.0 {
                let re = amplitude + noise_amp * gauss.sample(&mut stream);
                let im = noise_amp * gauss.sample(&mut stream);
                acc += re * re + im * im;
            } else {
                acc += line;
            }
        }
        frequencies.push(f);
        power.push(acc / noise.rms_averages as f64);
    }
    Ok(SpectrumRecord {
        frequencies,
        power,
        bin_width: noise.resolution_bandwidth,
        averages: noise.rms_averages,
        timestamp,
    })
}
