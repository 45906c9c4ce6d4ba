//! Extraction of the Casimir coefficient from a near-cancellation run:
//! electrostatic subtraction, the smallest-distance point selection, the
//! one-parameter amplitude fit and its exponent, wedge and drift variants.

use serde::{Deserialize, Serialize};

use super::calibration::DistanceModel;
use super::lm::{lm_fit, FitResult, LeastSquaresModel, LmOptions};
use crate::error::{Error, Result};
use crate::physics::constants::PhysicalConstants;
use crate::physics::models::{kc_from_coefficients, kc_sigma};
use crate::physics::types::{CalibrationParams, CasimirParams};
use crate::physics::wedge::wedge_factor;
use crate::sim::scan::MeasurementRun;

/// One electrostatically subtracted point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    /// Gap d = d_r + d0 (m).
    pub distance: f64,
    /// Propagated gap error, dominated by the d0 uncertainty (m).
    pub sigma_distance: f64,
    /// Residual squared-frequency shift after subtraction (Hz^2).
    pub shift: f64,
    /// Per-point shift error: measurement noise plus the propagated
    /// calibration uncertainty of the subtracted model (Hz^2).
    pub sigma_shift: f64,
    pub time: f64,
}

/// A subtracted run, ready for the Casimir-term fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRun {
    pub label: String,
    pub points: Vec<ResidualPoint>,
}

impl ResidualRun {
    /// Indices of the n smallest-distance points, closest first.
    pub fn smallest(&self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.points.len()).collect();
        idx.sort_by(|&a, &b| self.points[a].distance.total_cmp(&self.points[b].distance));
        idx.truncate(n);
        idx
    }
}

/// Subtract the fitted electrostatic model from a run and propagate the
/// calibration covariance into per-point errors.
///
/// The shift error is enlarged by the linearized uncertainty of the
/// subtracted model using the full 4x4 covariance of
/// {offset, d0, C_el, V0}; the gap coordinate becomes d = d_r + d0 with
/// the d0 error attached to every point.
pub fn subtract_electrostatic(
    run: &MeasurementRun,
    cal: &CalibrationParams,
    dm: &DistanceModel,
) -> Result<ResidualRun> {
    run.validate()?;
    cal.validate()?;
    let sigma_d0 = cal.sigma_d0();
    let mut points = Vec::with_capacity(run.points.len());
    for p in &run.points {
        let d_r = dm.d_r(p.v_pzt, p.d_s);
        let d = d_r + cal.d0;
        if d <= 0.0 {
            return Err(Error::Contact(format!(
                "corrected gap {d:.3e} m is non-positive at V_PZT = {}",
                p.v_pzt
            )));
        }
        let v_r = p.v_c - cal.v0;
        let d3 = d * d * d;
        let d4 = d3 * d;
        let model = -cal.delta_nu2_offset - cal.c_el * v_r * v_r / d3;
        // Gradient of the subtracted model w.r.t. {offset, d0, c_el, v0}.
        let grad = [
            -1.0,
            3.0 * cal.c_el * v_r * v_r / d4,
            -v_r * v_r / d3,
            2.0 * cal.c_el * v_r / d3,
        ];
        let mut var_sub = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                var_sub += grad[i] * cal.covariance[i][j] * grad[j];
            }
        }
        let sigma_shift = (p.sigma_delta_nu2 * p.sigma_delta_nu2 + var_sub.max(0.0)).sqrt();
        points.push(ResidualPoint {
            distance: d,
            sigma_distance: sigma_d0,
            shift: p.delta_nu2 - model,
            sigma_shift,
            time: p.time,
        });
    }
    Ok(ResidualRun {
        label: run.label.clone(),
        points,
    })
}

/// Linear amplitude fit of shift = -c / d^5 with fixed per-point errors.
struct AmplitudeModel<'a> {
    points: &'a [ResidualPoint],
    idx: &'a [usize],
    sigma_eff: &'a [f64],
    /// Common shift applied to every distance (common-mode probing).
    distance_shift: f64,
}

impl LeastSquaresModel for AmplitudeModel<'_> {
    fn residual_count(&self) -> usize {
        self.idx.len()
    }
    fn param_count(&self) -> usize {
        1
    }
    fn residual(&self, p: &[f64], i: usize) -> f64 {
        let pt = &self.points[self.idx[i]];
        let d = pt.distance + self.distance_shift;
        let d5 = d * d * d * d * d;
        (pt.shift + p[0] / d5) / self.sigma_eff[i]
    }
    fn jacobian_row(&self, _p: &[f64], i: usize, out: &mut [f64]) -> bool {
        let pt = &self.points[self.idx[i]];
        let d = pt.distance + self.distance_shift;
        let d5 = d * d * d * d * d;
        out[0] = 1.0 / (d5 * self.sigma_eff[i]);
        true
    }
    fn param_scales(&self) -> Vec<f64> {
        vec![1e-28]
    }
}

fn amplitude_fit(
    resid: &ResidualRun,
    idx: &[usize],
    distance_shift: f64,
) -> Result<(f64, FitResult)> {
    let first = &resid.points[idx[0]];
    let d0_5 = first.distance.powi(5);
    let mut c = (-first.shift * d0_5).max(1e-32);
    let mut fit = None;
    // Effective-variance iteration: per-point errors fold the gap error in
    // through the current model slope 5 c / d^6.
    for _ in 0..16 {
        let sigma_eff: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let pt = &resid.points[i];
                let d = pt.distance + distance_shift;
                let slope = 5.0 * c / (d * d * d * d * d * d);
                (pt.sigma_shift * pt.sigma_shift
                    + slope * slope * pt.sigma_distance * pt.sigma_distance)
                    .sqrt()
            })
            .collect();
        let model = AmplitudeModel {
            points: &resid.points,
            idx,
            sigma_eff: &sigma_eff,
            distance_shift,
        };
        let res = lm_fit(&model, &[c], &LmOptions::default())?;
        let c_new = res.params[0];
        let done = (c_new - c).abs() <= 1e-12 * c_new.abs().max(1e-32);
        c = c_new;
        fit = Some(res);
        if done {
            break;
        }
    }
    Ok((c, fit.unwrap()))
}

/// Fit -C_Cas/d^5 to the `n_points` smallest-distance residuals with
/// x- and y-errors handled by the effective-variance method, and derive
/// K_C against the supplied calibration coefficient.
///
/// The reported sigma adds, on top of the fit covariance, the joint
/// propagation of the gap-scale error common to all points (probed by
/// refitting with every distance shifted by one sigma). A non-positive
/// fitted coefficient is returned as-is; callers gate on
/// [`CasimirParams::is_attractive`].
pub fn fit_casimir(
    resid: &ResidualRun,
    n_points: usize,
    c_el: f64,
    sigma_c_el: f64,
    constants: &PhysicalConstants,
) -> Result<(CasimirParams, FitResult)> {
    if n_points < 2 {
        return Err(Error::Data("Casimir fit needs at least 2 points".into()));
    }
    if resid.points.len() < n_points {
        return Err(Error::Data(format!(
            "asked for {n_points} points, run has {}",
            resid.points.len()
        )));
    }
    let idx = resid.smallest(n_points);
    let (c, fit) = amplitude_fit(resid, &idx, 0.0)?;

    // Common-mode gap-scale propagation.
    let sigma_d_common =
        idx.iter().map(|&i| resid.points[i].sigma_distance).sum::<f64>() / idx.len() as f64;
    let sigma_common = if sigma_d_common > 0.0 {
        let (c_shift, _) = amplitude_fit(resid, &idx, sigma_d_common)?;
        (c_shift - c).abs()
    } else {
        0.0
    };
    let sigma_c_cas = (fit.covariance[0][0].max(0.0) + sigma_common * sigma_common).sqrt();

    let kc = kc_from_coefficients(c, c_el, constants)?;
    let sigma_kc = if c != 0.0 {
        kc_sigma(kc, c, sigma_c_cas, c_el, sigma_c_el, 0.0)
    } else {
        0.0
    };
    Ok((
        CasimirParams {
            c_cas: c,
            sigma_c_cas,
            kc,
            sigma_kc,
            exponent: 5.0,
            drift_rate: 0.0,
        },
        fit,
    ))
}

/// Chi-squared scan over the number of selected smallest-distance points:
/// fit each n in [n_min, N] and pick the n with the highest chi-squared
/// probability.
pub fn scan_point_selection(
    resid: &ResidualRun,
    c_el: f64,
    sigma_c_el: f64,
    constants: &PhysicalConstants,
    n_min: usize,
) -> Result<(usize, Vec<(usize, f64)>)> {
    let n_max = resid.points.len();
    if n_max < n_min {
        return Err(Error::Data(format!(
            "selection scan needs at least {n_min} points, run has {n_max}"
        )));
    }
    let mut trace = Vec::new();
    let mut best = (n_min, -1.0);
    for n in n_min..=n_max {
        let (_, fit) = fit_casimir(resid, n, c_el, sigma_c_el, constants)?;
        trace.push((n, fit.chi2_probability));
        if fit.chi2_probability > best.1 {
            best = (n, fit.chi2_probability);
        }
    }
    Ok((best.0, trace))
}

/// Free-exponent power-law fit -B/d^n over the selected points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub sigma_exponent: f64,
    /// Amplitude in SI units (Hz^2 m^exponent).
    pub amplitude: f64,
    pub fit: FitResult,
}

/// Power-law model in micrometer distance units for conditioning:
/// params [b_um, n], model shift = -b_um / (d/1um)^n.
struct PowerLawModel<'a> {
    points: &'a [ResidualPoint],
    idx: &'a [usize],
    sigma_eff: &'a [f64],
    distance_shift: f64,
}

const UM: f64 = 1e-6;

impl LeastSquaresModel for PowerLawModel<'_> {
    fn residual_count(&self) -> usize {
        self.idx.len()
    }
    fn param_count(&self) -> usize {
        2
    }
    fn residual(&self, p: &[f64], i: usize) -> f64 {
        let pt = &self.points[self.idx[i]];
        let du = (pt.distance + self.distance_shift) / UM;
        (pt.shift + p[0] * du.powf(-p[1])) / self.sigma_eff[i]
    }
    fn jacobian_row(&self, p: &[f64], i: usize, out: &mut [f64]) -> bool {
        let pt = &self.points[self.idx[i]];
        let du = (pt.distance + self.distance_shift) / UM;
        let pow = du.powf(-p[1]);
        out[0] = pow / self.sigma_eff[i];
        out[1] = -p[0] * du.ln() * pow / self.sigma_eff[i];
        true
    }
    fn param_scales(&self) -> Vec<f64> {
        vec![100.0, 1.0]
    }
}

fn power_law_fit(
    resid: &ResidualRun,
    idx: &[usize],
    distance_shift: f64,
) -> Result<(f64, f64, FitResult)> {
    let first = &resid.points[idx[0]];
    let du0 = first.distance / UM;
    let mut b = (-first.shift * du0.powi(5)).max(1e-6);
    let mut n = 5.0;
    let mut fit = None;
    for _ in 0..16 {
        let sigma_eff: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let pt = &resid.points[i];
                let du = (pt.distance + distance_shift) / UM;
                let slope = n * b * du.powf(-n - 1.0) / UM;
                (pt.sigma_shift * pt.sigma_shift
                    + slope * slope * pt.sigma_distance * pt.sigma_distance)
                    .sqrt()
            })
            .collect();
        let model = PowerLawModel {
            points: &resid.points,
            idx,
            sigma_eff: &sigma_eff,
            distance_shift,
        };
        let res = lm_fit(&model, &[b, n], &LmOptions::default())?;
        let done = (res.params[0] - b).abs() <= 1e-12 * res.params[0].abs().max(1e-32)
            && (res.params[1] - n).abs() <= 1e-12 * res.params[1].abs().max(1e-32);
        b = res.params[0];
        n = res.params[1];
        fit = Some(res);
        if done {
            break;
        }
    }
    Ok((b, n, fit.unwrap()))
}

/// Fit -B/d^n with the exponent free over the `n_points` smallest
/// distances.
pub fn fit_free_exponent(resid: &ResidualRun, n_points: usize) -> Result<ExponentFit> {
    if n_points < 3 {
        return Err(Error::Data("free-exponent fit needs at least 3 points".into()));
    }
    if resid.points.len() < n_points {
        return Err(Error::Data(format!(
            "asked for {n_points} points, run has {}",
            resid.points.len()
        )));
    }
    let idx = resid.smallest(n_points);
    let (b, n, fit) = power_law_fit(resid, &idx, 0.0)?;
    let sigma_d_common =
        idx.iter().map(|&i| resid.points[i].sigma_distance).sum::<f64>() / idx.len() as f64;
    let sigma_common = if sigma_d_common > 0.0 {
        let (_, n_shift, _) = power_law_fit(resid, &idx, sigma_d_common)?;
        (n_shift - n).abs()
    } else {
        0.0
    };
    let sigma_exponent = (fit.covariance[1][1].max(0.0) + sigma_common * sigma_common).sqrt();
    Ok(ExponentFit {
        exponent: n,
        sigma_exponent,
        amplitude: b * UM.powf(n),
        fit,
    })
}

/// Wedge-deviation refit: amplitude plus a parallelism deviation theta*W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeFit {
    /// Fitted deviation from parallelism across the plate width (m).
    pub deviation: f64,
    /// One-sigma bound from the delta-chi2 = 1 profile.
    pub sigma_deviation: f64,
    pub c_cas: f64,
    pub sigma_c_cas: f64,
    pub fit: FitResult,
}

/// Wedge model: shift = -c * factor5(|u|/(2d)) / d^5, params [c, u].
///
/// Weighted by the shift errors alone: the deviation is a shape parameter
/// resolved against the residual curve, while the common gap-scale error
/// is absorbed by the amplitude.
struct WedgeModel<'a> {
    points: &'a [ResidualPoint],
    idx: &'a [usize],
}

impl WedgeModel<'_> {
    fn value(&self, c: f64, u: f64, i: usize) -> f64 {
        let pt = &self.points[self.idx[i]];
        let d = pt.distance;
        let h = (0.5 * u.abs() / d).min(0.999_999);
        let d5 = d * d * d * d * d;
        -c * wedge_factor(5, h).unwrap_or(f64::INFINITY) / d5
    }
}

impl LeastSquaresModel for WedgeModel<'_> {
    fn residual_count(&self) -> usize {
        self.idx.len()
    }
    fn param_count(&self) -> usize {
        2
    }
    fn residual(&self, p: &[f64], i: usize) -> f64 {
        let pt = &self.points[self.idx[i]];
        (pt.shift - self.value(p[0], p[1], i)) / pt.sigma_shift
    }
    fn param_scales(&self) -> Vec<f64> {
        vec![1e-28, 1e-8]
    }
}

fn wedge_profile_chi2(model: &WedgeModel, u: f64) -> f64 {
    // Profile over the amplitude, which enters linearly.
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..model.idx.len() {
        let pt = &model.points[model.idx[i]];
        let g = model.value(1.0, u, i);
        let w = 1.0 / (pt.sigma_shift * pt.sigma_shift);
        num += w * pt.shift * g;
        den += w * g * g;
    }
    let c = num / den;
    (0..model.idx.len())
        .map(|i| {
            let pt = &model.points[model.idx[i]];
            let r = (pt.shift - model.value(c, u, i)) / pt.sigma_shift;
            r * r
        })
        .sum()
}

/// Fit the wedge-averaged Casimir model with the parallelism deviation
/// free, over the `n_points` smallest distances.
pub fn fit_wedge_deviation(resid: &ResidualRun, n_points: usize) -> Result<WedgeFit> {
    if n_points < 3 || resid.points.len() < n_points {
        return Err(Error::Data(
            "wedge fit needs at least 3 selected points".into(),
        ));
    }
    let idx = resid.smallest(n_points);
    let first = &resid.points[idx[0]];
    let c_init = (-first.shift * first.distance.powi(5)).max(1e-32);
    let model = WedgeModel {
        points: &resid.points,
        idx: &idx,
    };
    let fit = lm_fit(&model, &[c_init, 1e-8], &LmOptions::default())?;
    let c = fit.params[0];
    let u_hat = fit.params[1].abs();

    // One-sigma deviation from the delta-chi2 = 1 profile (the model is
    // even in u, so the covariance column degenerates near u = 0).
    let chi2_min = wedge_profile_chi2(&model, u_hat);
    let target = chi2_min + 1.0;
    let mut hi = u_hat.max(1e-9);
    let d_min = resid.points[idx[0]].distance;
    let u_cap = 1.8 * d_min; // just below the contact bound 2 d_min
    while wedge_profile_chi2(&model, hi) < target && hi < u_cap {
        hi *= 1.5;
    }
    let sigma_deviation = if hi >= u_cap {
        u_cap
    } else {
        let mut lo = u_hat;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if wedge_profile_chi2(&model, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi) - u_hat
    };

    Ok(WedgeFit {
        deviation: u_hat,
        sigma_deviation,
        c_cas: c,
        sigma_c_cas: fit.covariance[0][0].max(0.0).sqrt(),
        fit,
    })
}

/// Global fit of all four runs with a linear shift drift on the
/// near-cancellation run: parameters
/// {offset, d0, C_el, V0, C_Cas, drift rate}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    pub calibration: CalibrationParams,
    pub casimir: CasimirParams,
    pub drift_rate: f64,
    pub sigma_drift_rate: f64,
    pub fit: FitResult,
}

struct GlobalDriftModel {
    /// (run index, d_r, value, sigma, v_c, time)
    points: Vec<(usize, f64, f64, f64, f64, f64)>,
    extraction_run: usize,
    extraction_t0: f64,
}

impl LeastSquaresModel for GlobalDriftModel {
    fn residual_count(&self) -> usize {
        self.points.len()
    }
    fn param_count(&self) -> usize {
        6
    }
    fn residual(&self, p: &[f64], i: usize) -> f64 {
        let (run, d_r, value, sigma, v_c, time) = self.points[i];
        let d = d_r + p[1];
        if d <= 1e-9 {
            return 1e12 * (1.0 + (1e-9 - d) * 1e9);
        }
        let v_r = v_c - p[3];
        let d3 = d * d * d;
        let d5 = d3 * d * d;
        let mut model = -p[0] - p[2] * v_r * v_r / d3 - p[4] / d5;
        if run == self.extraction_run {
            model += p[5] * (time - self.extraction_t0);
        }
        (value - model) / sigma
    }
    fn jacobian_row(&self, p: &[f64], i: usize, out: &mut [f64]) -> bool {
        let (run, d_r, _, sigma, v_c, time) = self.points[i];
        let d = d_r + p[1];
        if d <= 1e-9 {
            return false;
        }
        let v_r = v_c - p[3];
        let d3 = d * d * d;
        let d4 = d3 * d;
        let d5 = d3 * d * d;
        let d6 = d5 * d;
        out[0] = 1.0 / sigma;
        out[1] = -(3.0 * p[2] * v_r * v_r / d4 + 5.0 * p[4] / d6) / sigma;
        out[2] = (v_r * v_r / d3) / sigma;
        out[3] = -(2.0 * p[2] * v_r / d3) / sigma;
        out[4] = (1.0 / d5) / sigma;
        out[5] = if run == self.extraction_run {
            -(time - self.extraction_t0) / sigma
        } else {
            0.0
        };
        true
    }
    fn param_scales(&self) -> Vec<f64> {
        vec![1.0, 1e-7, 1e-13, 1e-2, 1e-28, 1e-3]
    }
}

/// Fit all runs globally with a drift term on the extraction run.
pub fn fit_with_drift(
    runs: &[MeasurementRun],
    extraction_index: usize,
    dm: &DistanceModel,
    init: &CalibrationParams,
    c_cas_init: f64,
    constants: &PhysicalConstants,
) -> Result<DriftFit> {
    if extraction_index >= runs.len() {
        return Err(Error::Config("extraction run index out of range".into()));
    }
    for run in runs {
        run.validate()?;
        for w in run.points.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::Config(format!(
                    "run '{}' lacks strictly increasing timestamps",
                    run.label
                )));
            }
        }
    }
    let extraction_t0 = runs[extraction_index].points[0].time;
    let mut points = Vec::new();
    for (ri, run) in runs.iter().enumerate() {
        for p in &run.points {
            points.push((
                ri,
                dm.d_r(p.v_pzt, p.d_s),
                p.delta_nu2,
                p.sigma_delta_nu2,
                p.v_c,
                p.time,
            ));
        }
    }
    let model = GlobalDriftModel {
        points,
        extraction_run: extraction_index,
        extraction_t0,
    };
    let initial = [
        init.delta_nu2_offset,
        init.d0,
        init.c_el,
        init.v0,
        c_cas_init.max(1e-32),
        0.0,
    ];
    let fit = lm_fit(&model, &initial, &LmOptions::default())?;
    if !fit.converged {
        return Err(Error::Convergence(
            "drift-augmented global fit hit the iteration cap".into(),
        ));
    }

    let mut covariance = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            covariance[i][j] = fit.covariance[i][j];
        }
    }
    let calibration = CalibrationParams {
        delta_nu2_offset: fit.params[0],
        d0: fit.params[1],
        c_el: fit.params[2],
        v0: fit.params[3],
        covariance,
    };
    let c_cas = fit.params[4];
    let sigma_c_cas = fit.sigma(4);
    let kc = kc_from_coefficients(c_cas, calibration.c_el, constants)?;
    let rho = fit.correlation(4, 2);
    let sigma_kc = kc_sigma(kc, c_cas, sigma_c_cas, calibration.c_el, fit.sigma(2), rho);
    Ok(DriftFit {
        calibration,
        casimir: CasimirParams {
            c_cas,
            sigma_c_cas,
            kc,
            sigma_kc,
            exponent: 5.0,
            drift_rate: fit.params[5],
        },
        drift_rate: fit.params[5],
        sigma_drift_rate: fit.sigma(5),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::types::ApparatusConfig;

    fn truth_calibration(cfg: &ApparatusConfig) -> CalibrationParams {
        let mut covariance = [[0.0; 4]; 4];
        covariance[0][0] = 0.6 * 0.6;
        covariance[1][1] = 2.2e-8 * 2.2e-8;
        covariance[2][2] = (0.08e-13_f64).powi(2);
        covariance[3][3] = (1.2e-3_f64).powi(2);
        CalibrationParams {
            delta_nu2_offset: cfg.shift_offset_true,
            d0: cfg.distance_correction_d0_true,
            c_el: cfg.c_el_true(),
            v0: cfg.offset_voltage_v0_true,
            covariance,
        }
    }

    /// Noise-free residual run generated directly from the pure power law.
    fn synthetic_residuals(c_cas: f64, exponent: f64, sigma_d: f64) -> ResidualRun {
        let points = (0..9)
            .map(|i| {
                let d = 0.5e-6 + i as f64 * 0.075e-6;
                let shift = -c_cas / UM.powf(exponent) / (d / UM).powf(exponent);
                ResidualPoint {
                    distance: d,
                    sigma_distance: sigma_d,
                    shift,
                    sigma_shift: (0.015 * shift.abs()).max(1.9),
                    time: 64.0 * i as f64,
                }
            })
            .collect();
        ResidualRun {
            label: "synthetic".into(),
            points,
        }
    }

    #[test]
    fn noiseless_subtraction_leaves_pure_casimir_term() {
        use crate::sim::noise::{DriftConfig, NoiseConfig};
        use crate::sim::plan::{ScanPlan, ScanStep};
        use crate::sim::scan::run_gap_scan;
        let cfg = ApparatusConfig::default();
        let steps: Vec<ScanStep> = (0..12)
            .map(|i| {
                let d_r = 3.0e-6 - i as f64 * 0.18e-6;
                ScanStep {
                    v_pzt: (cfg.reference_distance_dr0 - d_r) / cfg.actuation_coefficient_a,
                    v_c: -68.6e-3,
                    dwell_time: 64.0,
                }
            })
            .collect();
        let plan = ScanPlan::new(steps, 0.0, 2400.0).unwrap();
        let noise = NoiseConfig {
            frequency_stat_sigma: 0.0,
            ..NoiseConfig::default()
        };
        let mut run =
            run_gap_scan(&cfg, &plan, &noise, &DriftConfig::none(), true, "sub").unwrap();
        for p in &mut run.points {
            p.sigma_delta_nu2 = 1.936;
        }
        let dm = DistanceModel {
            reference_distance_dr0: cfg.reference_distance_dr0,
            actuation_coefficient_a: cfg.actuation_coefficient_a,
        };
        let resid = subtract_electrostatic(&run, &truth_calibration(&cfg), &dm).unwrap();
        for p in &resid.points {
            let expected = -cfg.c_cas_true() / p.distance.powi(5);
            assert!(
                (p.shift - expected).abs() / expected.abs() < 1e-9,
                "residual {} vs {expected}",
                p.shift
            );
        }
        // Propagated per-point error grows monotonically as d shrinks
        // (the d0-term derivative 3 C_el V_r^2/d^4 dominates).
        for w in resid.points.windows(2) {
            assert!(w[1].distance < w[0].distance);
            assert!(w[1].sigma_shift > w[0].sigma_shift);
        }
    }

    #[test]
    fn noiseless_amplitude_recovery_is_exact() {
        let resid = synthetic_residuals(2.34e-28, 5.0, 2.2e-8);
        let constants = PhysicalConstants::default();
        let (cas, fit) = fit_casimir(&resid, 9, 4.24e-13, 0.11e-13, &constants).unwrap();
        assert!(fit.converged);
        assert!((cas.c_cas - 2.34e-28).abs() / 2.34e-28 < 1e-9);
        assert!((cas.kc - 1.22e-27).abs() / 1.22e-27 < 0.01);
        assert!(cas.is_attractive());
        // The K_C identity against the supplied C_el holds to 1e-12.
        let kc = kc_from_coefficients(cas.c_cas, 4.24e-13, &constants).unwrap();
        assert!((cas.kc - kc).abs() / kc <= 1e-12);
    }

    #[test]
    fn noiseless_exponent_recovery_is_exact() {
        let resid = synthetic_residuals(2.34e-28, 5.0, 2.2e-8);
        let exp = fit_free_exponent(&resid, 9).unwrap();
        assert!((exp.exponent - 5.0).abs() < 1e-6, "n = {}", exp.exponent);
        assert!((exp.amplitude - 2.34e-28).abs() / 2.34e-28 < 1e-4);
        // A d^-3 truth (electrostatic leakage) comes back as n = 3.
        let resid3 = synthetic_residuals(3.0e-17, 3.0, 2.2e-8);
        let exp3 = fit_free_exponent(&resid3, 9).unwrap();
        assert!((exp3.exponent - 3.0).abs() < 1e-6, "n = {}", exp3.exponent);
    }

    #[test]
    fn wedge_fit_flat_truth_reduces_to_amplitude_fit() {
        let resid = synthetic_residuals(2.34e-28, 5.0, 0.0);
        let wedge = fit_wedge_deviation(&resid, 9).unwrap();
        assert!((wedge.c_cas - 2.34e-28).abs() / 2.34e-28 < 1e-6);
        assert!(
            wedge.deviation.abs() < 2e-9,
            "flat truth gave deviation {:e}",
            wedge.deviation
        );
        assert!(wedge.sigma_deviation > 0.0);
    }

    #[test]
    fn wedge_injection_recovery() {
        // Inject a 100 nm deviation and recover it within two sigma.
        let u_true = 100e-9;
        let points = (0..9)
            .map(|i| {
                let d: f64 = 0.5e-6 + i as f64 * 0.075e-6;
                let h = 0.5 * u_true / d;
                let shift =
                    -2.34e-28 / d.powi(5) * crate::physics::wedge::wedge_factor(5, h).unwrap();
                ResidualPoint {
                    distance: d,
                    sigma_distance: 0.0,
                    shift,
                    sigma_shift: (0.015 * shift.abs()).max(1.9),
                    time: 64.0 * i as f64,
                }
            })
            .collect();
        let resid = ResidualRun {
            label: "wedge".into(),
            points,
        };
        let wedge = fit_wedge_deviation(&resid, 9).unwrap();
        assert!(
            (wedge.deviation - u_true).abs() < 2.0 * wedge.sigma_deviation,
            "deviation {:e} +- {:e}",
            wedge.deviation,
            wedge.sigma_deviation
        );
    }
}
