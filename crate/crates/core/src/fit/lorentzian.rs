//! Lorentzian resonance-curve fitting of analyzer spectra.

use serde::{Deserialize, Serialize};

use super::lm::{lm_fit, FitResult, LeastSquaresModel, LmOptions};
use crate::error::{Error, Result};
use crate::sim::spectrum::SpectrumRecord;

/// Parameters of the fitted line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianParams {
    /// Resonance frequency (Hz).
    pub center: f64,
    /// Full linewidth gamma (Hz).
    pub linewidth: f64,
    /// Peak power above baseline (V^2/Hz).
    pub amplitude: f64,
    /// Flat baseline (V^2/Hz).
    pub baseline: f64,
}

/// Line fit plus the center frequency error used downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub params: LorentzianParams,
    /// Center error: fit covariance combined in quadrature with the fixed
    /// statistical frequency term, so it never drops below that floor.
    pub sigma_center: f64,
    pub fit: FitResult,
}

struct LineModel<'a> {
    spectrum: &'a SpectrumRecord,
    sigma: Vec<f64>,
}

impl LeastSquaresModel for LineModel<'_> {
    fn residual_count(&self) -> usize {
        self.spectrum.power.len()
    }
    fn param_count(&self) -> usize {
        4
    }
    fn residual(&self, p: &[f64], i: usize) -> f64 {
        let (center, gamma, amp, base) = (p[0], p[1], p[2], p[3]);
        let w = 0.5 * gamma;
        let x = self.spectrum.frequencies[i] - center;
        let model = base + amp * w * w / (x * x + w * w);
        (self.spectrum.power[i] - model) / self.sigma[i]
    }
    fn jacobian_row(&self, p: &[f64], i: usize, out: &mut [f64]) -> bool {
        let (center, gamma, amp, _) = (p[0], p[1], p[2], p[3]);
        let w = 0.5 * gamma;
        let x = self.spectrum.frequencies[i] - center;
        let den = x * x + w * w;
        let lorentz = w * w / den;
        let s = self.sigma[i];
        out[0] = -(amp * lorentz * 2.0 * x / den) / s;
        out[1] = -(amp * w * x * x / (den * den)) / s;
        out[2] = -lorentz / s;
        out[3] = -1.0 / s;
        true
    }
    fn param_scales(&self) -> Vec<f64> {
        vec![1.0, 0.1, self.spectrum.power.iter().cloned().fold(0.0, f64::max), 1e-16]
    }
}

/// Fit a Lorentzian line to a spectrum.
///
/// `stat_sigma` is the fixed statistical frequency uncertainty added in
/// quadrature to the fit error of the center.
pub fn fit_lorentzian(spectrum: &SpectrumRecord, stat_sigma: f64) -> Result<LorentzianFit> {
    spectrum.validate()?;
    let n = spectrum.power.len();
    if n < 8 {
        return Err(Error::Data("spectrum has too few bins".into()));
    }

    // Peak detection against the median background.
    let mut sorted = spectrum.power.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    let (peak_idx, &peak) = spectrum
        .power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    if !(peak > 3.0 * median.max(1e-300)) {
        return Err(Error::NoPeak(format!(
            "peak/baseline = {:.2} below the resolvable threshold 3",
            peak / median.max(1e-300)
        )));
    }

    // Initial guesses: half-maximum crossing for the width.
    let half = median + 0.5 * (peak - median);
    let mut left = peak_idx;
    while left > 0 && spectrum.power[left] > half {
        left -= 1;
    }
    let mut right = peak_idx;
    while right + 1 < n && spectrum.power[right] > half {
        right += 1;
    }
    let width_bins = (right - left).max(2) as f64;
    let initial = [
        spectrum.frequencies[peak_idx],
        width_bins * spectrum.bin_width,
        peak - median,
        median,
    ];

    // Per-bin error of an averaged analyzer spectrum: the bin value over
    // the square root of the number of rms averages, floored at the
    // baseline level so empty bins cannot acquire runaway weight.
    let avg = (spectrum.averages.max(1) as f64).sqrt();
    let floor = median.max(peak * 1e-9);
    let sigma: Vec<f64> = spectrum
        .power
        .iter()
        .map(|&p| p.max(floor) / avg)
        .collect();

    let model = LineModel { spectrum, sigma };
    let fit = lm_fit(&model, &initial, &LmOptions::default())?;
    let params = LorentzianParams {
        center: fit.params[0],
        linewidth: fit.params[1].abs(),
        amplitude: fit.params[2],
        baseline: fit.params[3],
    };
    if params.linewidth <= 0.0 || params.amplitude < 0.0 {
        return Err(Error::Convergence(
            "line fit collapsed to a non-physical shape".into(),
        ));
    }
    let sigma_center = (fit.sigma(0).powi(2) + stat_sigma * stat_sigma).sqrt();
    Ok(LorentzianFit {
        params,
        sigma_center,
        fit,
    })
}
