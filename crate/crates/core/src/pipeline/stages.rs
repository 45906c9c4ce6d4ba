//! The four measurement stages, each a pure function of the campaign
//! configuration (plus the records produced by earlier stages).

use serde::{Deserialize, Serialize};

use super::CampaignConfig;
use crate::error::{Error, Result};
use crate::fit::calibration::{fit_calibration_global, CalibrationOptions, DistanceModel};
use crate::fit::extraction::{
    fit_casimir, fit_free_exponent, fit_wedge_deviation, fit_with_drift, scan_point_selection,
    subtract_electrostatic, DriftFit, ExponentFit, ResidualRun, WedgeFit,
};
use crate::fit::lm::{lm_fit, FitResult, LeastSquaresModel, LmOptions};
use crate::physics::types::{ApparatusConfig, CalibrationParams, CasimirParams};
use crate::sim::capacitance::{capacitance_at_tilt, BRIDGE_RESOLUTION};
use crate::sim::deflection::run_deflection_sweep;
use crate::sim::noise::{DriftConfig, NoiseConfig};
use crate::sim::plan::{ScanPlan, ScanStep};
use crate::sim::rng::derive_seed;
use crate::sim::scan::{
    estimate_static_deflection, run_gap_scan, static_deflection_fixed_point, MeasurementRun,
};

fn distance_model(cfg: &ApparatusConfig) -> DistanceModel {
    DistanceModel {
        reference_distance_dr0: cfg.reference_distance_dr0,
        actuation_coefficient_a: cfg.actuation_coefficient_a,
    }
}

/// PZT voltage that realizes a target true gap, found by iterating the
/// self-consistent deflection (generator-side knowledge). The initial
/// guess already compensates the static bending so the first probe stays
/// on the stable side of the snap-in boundary.
fn v_pzt_for_gap(cfg: &ApparatusConfig, target: f64, v_r: f64, casimir_on: bool) -> Result<f64> {
    let d_s_seed = estimate_static_deflection(target, v_r, cfg, casimir_on);
    let mut v = (cfg.reference_distance_dr0 + cfg.distance_correction_d0_true
        - (target + d_s_seed))
        / cfg.actuation_coefficient_a;
    for _ in 0..4 {
        let (_, d, _) = static_deflection_fixed_point(
            v,
            v_r,
            cfg.distance_correction_d0_true,
            cfg,
            casimir_on,
        )?;
        v += (d - target) / cfg.actuation_coefficient_a;
    }
    Ok(v)
}

fn plan_for_targets(
    cfg: &CampaignConfig,
    targets_descending: &[f64],
    v_c: f64,
    casimir_on: bool,
) -> Result<ScanPlan> {
    let v_r = v_c - cfg.apparatus.offset_voltage_v0_true;
    let steps: Result<Vec<ScanStep>> = targets_descending
        .iter()
        .map(|&d| {
            Ok(ScanStep {
                v_pzt: v_pzt_for_gap(&cfg.apparatus, d, v_r, casimir_on)?,
                v_c,
                dwell_time: cfg.dwell_time,
            })
        })
        .collect();
    ScanPlan::new(steps?, 0.0, cfg.acquisition_budget)
}

fn linspace_descending(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| hi - (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Simulate the three large-bias calibration scans (every configured bias
/// except the near-cancellation one), drift-free.
pub fn simulate_calibration_runs(cfg: &CampaignConfig, seed: u64) -> Result<Vec<MeasurementRun>> {
    cfg.validate()?;
    let skip = cfg.near_cancellation_index()?;
    let targets = linspace_descending(
        cfg.calibration_max_gap,
        cfg.calibration_min_gap,
        cfg.calibration_points,
    );
    let mut runs = Vec::new();
    for (i, &v_c) in cfg.bias_list_v.iter().enumerate() {
        if i == skip {
            continue;
        }
        let plan = plan_for_targets(cfg, &targets, v_c, true)?;
        let mut noise = cfg.noise.clone();
        noise.rng_seed = derive_seed(seed, &format!("calibration/{i}"));
        runs.push(run_gap_scan(
            &cfg.apparatus,
            &plan,
            &noise,
            &DriftConfig::none(),
            true,
            &format!("calibration-{:+.1}mV", v_c * 1e3),
        )?);
    }
    Ok(runs)
}

/// Simulate the near-cancellation extraction scan, with the configured
/// drift injected.
pub fn simulate_extraction_run(cfg: &CampaignConfig, seed: u64) -> Result<MeasurementRun> {
    cfg.validate()?;
    let idx = cfg.near_cancellation_index()?;
    let v_c = cfg.bias_list_v[idx];
    let mut targets = linspace_descending(cfg.scan_max_gap, cfg.coarse_lower_gap, cfg.coarse_points);
    targets.extend(linspace_descending(
        cfg.fine_upper_gap,
        cfg.scan_min_gap,
        cfg.fine_points,
    ));
    let plan = plan_for_targets(cfg, &targets, v_c, true)?;
    let mut noise = cfg.noise.clone();
    noise.rng_seed = derive_seed(seed, "extraction");
    run_gap_scan(
        &cfg.apparatus,
        &plan,
        &noise,
        &cfg.drift,
        true,
        &format!("extraction-{:+.1}mV", v_c * 1e3),
    )
}

// ---------------------------------------------------------------------
// Stage 1: parallelization by capacitance maximization
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltStep {
    pub tilt: [f64; 2],
    pub capacitance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelizationOutcome {
    pub residual_tilt: [f64; 2],
    /// Final quantized bridge reading (F).
    pub achieved_capacitance: f64,
    /// Unquantized capacitance of the perfectly flat configuration (F).
    pub flat_maximum: f64,
    pub evaluations: usize,
    pub trace: Vec<TiltStep>,
    /// True when the search stopped on a contact error and reported the
    /// last safe tilt.
    pub aborted: bool,
}

pub struct ParallelizeOptions {
    /// Quantize bridge readings to the 0.4 pF resolution.
    pub quantized: bool,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for ParallelizeOptions {
    fn default() -> Self {
        ParallelizeOptions {
            quantized: true,
            initial_step: 2.0e-4,
            min_step: 1.0e-6,
        }
    }
}

/// Coordinate-ascent maximization of the (quantized) bridge reading over
/// the two tilt axes at the closest-approach gap.
pub fn stage_parallelize_with(
    cfg: &CampaignConfig,
    opts: &ParallelizeOptions,
) -> Result<ParallelizationOutcome> {
    cfg.validate()?;
    let gap = cfg.parallelization_gap;
    let mut tilt = cfg.initial_tilt;
    let mut evaluations = 0usize;
    let mut trace = Vec::new();
    let mut aborted = false;

    let mut read = |t: [f64; 2], evaluations: &mut usize| -> Result<f64> {
        *evaluations += 1;
        capacitance_at_tilt(&cfg.apparatus, t, gap, opts.quantized)
    };

    let mut current = read(tilt, &mut evaluations)?;
    trace.push(TiltStep {
        tilt,
        capacitance: current,
    });

    let mut step = opts.initial_step;
    'outer: while step >= opts.min_step {
        let mut improved = false;
        for axis in 0..2 {
            for dir in [1.0, -1.0] {
                let mut candidate = tilt;
                candidate[axis] += dir * step;
                match read(candidate, &mut evaluations) {
                    Ok(c) if c > current => {
                        tilt = candidate;
                        current = c;
                        improved = true;
                        trace.push(TiltStep {
                            tilt,
                            capacitance: current,
                        });
                    }
                    Ok(_) => {}
                    Err(Error::Contact(_)) => {
                        aborted = true;
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                }
                if evaluations > 20_000 {
                    break 'outer;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let flat_maximum = capacitance_at_tilt(&cfg.apparatus, [0.0, 0.0], gap, false)?;
    Ok(ParallelizationOutcome {
        residual_tilt: tilt,
        achieved_capacitance: current,
        flat_maximum,
        evaluations,
        trace,
        aborted,
    })
}

pub fn stage_parallelize(cfg: &CampaignConfig) -> Result<ParallelizationOutcome> {
    stage_parallelize_with(cfg, &ParallelizeOptions::default())
}

// ---------------------------------------------------------------------
// Stage 2: offset voltage from static deflection parabolas
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetOutcome {
    /// Averaged offset voltage estimate (V) with scatter-based error.
    pub v0: f64,
    pub sigma_v0: f64,
    /// Per-distance vertex estimates (V).
    pub per_distance_v0: Vec<f64>,
    /// Per-distance deflection coefficients K_i (m/V^2), against the
    /// nominal distances.
    pub k_i: Vec<f64>,
    /// Effective-mass estimate from the K_i (kg).
    pub m_eff: f64,
    pub sigma_m_eff: f64,
}

/// Differenced deflection parabola y = a V^2 + b V (the zero-bias
/// deflection cancels in the differencing); vertex at V0 = -b/(2a).
struct DiffParabola {
    v: Vec<f64>,
    y: Vec<f64>,
    sigma: f64,
}

impl LeastSquaresModel for DiffParabola {
    fn residual_count(&self) -> usize {
        self.v.len()
    }
    fn param_count(&self) -> usize {
        2
    }
    fn residual(&self, p: &[f64], i: usize) -> f64 {
        let v = self.v[i];
        (self.y[i] - (p[0] * v * v + p[1] * v)) / self.sigma
    }
    fn jacobian_row(&self, _p: &[f64], i: usize, out: &mut [f64]) -> bool {
        let v = self.v[i];
        out[0] = -v * v / self.sigma;
        out[1] = -v / self.sigma;
        true
    }
}

/// Estimate the offset voltage and the effective mass from deflection
/// parabolas at several distances.
pub fn stage_offset_voltage(cfg: &CampaignConfig, seed: u64) -> Result<OffsetOutcome> {
    cfg.validate()?;
    let app = &cfg.apparatus;
    // The analyst dials nominal distances; the true gaps differ by the
    // (unknown) scale correction.
    let true_distances: Vec<f64> = cfg
        .offset_distances
        .iter()
        .map(|d| d + app.distance_correction_d0_true)
        .collect();
    let mut noise = cfg.noise.clone();
    noise.rng_seed = derive_seed(seed, "offset-voltage");
    let sweep = run_deflection_sweep(app, &true_distances, &cfg.offset_bias_v, &noise)?;

    // Effective noise of a differenced reading: reading noise of the
    // biased point plus half the bracketing-mean variance, plus the
    // residual random-walk term.
    let sigma_diff = (1.5 * noise.deflection_reading_sigma.powi(2)
        + 0.5 * noise.laser_drift_step.powi(2))
    .sqrt()
    .max(1e-12);

    let diffs = sweep.differenced();
    let mut per_distance_v0 = Vec::new();
    let mut k_i = Vec::new();
    let mut m_eff_values = Vec::new();
    let eight_pi2 = 8.0 * std::f64::consts::PI * std::f64::consts::PI;
    for (idx, &nominal_d) in cfg.offset_distances.iter().enumerate() {
        let mut v = Vec::new();
        let mut y = Vec::new();
        for &(i, v_c, signal) in &diffs {
            if i == idx {
                v.push(v_c);
                y.push(signal);
            }
        }
        let model = DiffParabola {
            v,
            y,
            sigma: sigma_diff,
        };
        let fit = lm_fit(&model, &[1.0, 0.1], &LmOptions::default())?;
        let a = fit.params[0];
        if a <= 0.0 {
            return Err(Error::Convergence(format!(
                "deflection parabola at {nominal_d:.2e} m has non-positive curvature"
            )));
        }
        let v0_i = -fit.params[1] / (2.0 * a);
        let k = a * app.interferometer_sensitivity;
        per_distance_v0.push(v0_i);
        k_i.push(k);
        m_eff_values.push(
            app.constants.epsilon0 * app.plate_area_s
                / (eight_pi2 * k * app.free_frequency_nu0.powi(2) * nominal_d * nominal_d),
        );
    }

    let n = per_distance_v0.len() as f64;
    let v0 = per_distance_v0.iter().sum::<f64>() / n;
    let sigma_v0 = if per_distance_v0.len() > 1 {
        let var = per_distance_v0
            .iter()
            .map(|x| (x - v0) * (x - v0))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::NAN
    };
    let m_eff = m_eff_values.iter().sum::<f64>() / n;
    let sigma_m_eff = if m_eff_values.len() > 1 {
        let var = m_eff_values.iter().map(|x| (x - m_eff) * (x - m_eff)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(OffsetOutcome {
        v0,
        sigma_v0,
        per_distance_v0,
        k_i,
        m_eff,
        sigma_m_eff,
    })
}

// ---------------------------------------------------------------------
// Stage 3: electrostatic calibration
// ---------------------------------------------------------------------

/// Run the global calibration fit on the three large-bias runs and gate
/// its chi-squared probability.
pub fn stage_calibrate(
    cfg: &CampaignConfig,
    v0_estimate: f64,
    runs: &[MeasurementRun],
) -> Result<(CalibrationParams, FitResult)> {
    if runs.len() < 3 {
        return Err(Error::Identifiability(format!(
            "calibration requires three bias runs, got {}",
            runs.len()
        )));
    }
    let (cal, fit) = fit_calibration_global(
        runs,
        &distance_model(&cfg.apparatus),
        &CalibrationOptions {
            v0_initial: v0_estimate,
            shared_offset: true,
        },
    )?;
    if !(0.01..=0.99).contains(&fit.chi2_probability) {
        return Err(Error::Convergence(format!(
            "calibration chi2 probability {:.4} outside the accepted [0.01, 0.99] band",
            fit.chi2_probability
        )));
    }
    Ok((cal, fit))
}

// ---------------------------------------------------------------------
// Stage 4: Casimir extraction with all cross-checks
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    pub residuals: ResidualRun,
    /// Chi-squared probability trace of the point-selection scan.
    pub selection_trace: Vec<(usize, f64)>,
    pub selected_n: usize,
    pub casimir: CasimirParams,
    pub casimir_fit: FitResult,
    pub exponent: ExponentFit,
    pub wedge: WedgeFit,
    pub drift: DriftFit,
}

/// Subtract the electrostatic model from the near-cancellation run and
/// run the amplitude, exponent, wedge and drift fits.
pub fn stage_extract_casimir(
    cfg: &CampaignConfig,
    cal: &CalibrationParams,
    calibration_runs: &[MeasurementRun],
    extraction_run: &MeasurementRun,
) -> Result<ExtractionOutcome> {
    let dm = distance_model(&cfg.apparatus);
    let constants = &cfg.apparatus.constants;
    let residuals = subtract_electrostatic(extraction_run, cal, &dm)
        .map_err(|e| Error::Data(format!("extraction stage: {e}")))?;
    let (selected_n, selection_trace) =
        scan_point_selection(&residuals, cal.c_el, cal.sigma_c_el(), constants, 5)
            .map_err(|e| Error::Data(format!("extraction stage: {e}")))?;
    let (casimir, casimir_fit) =
        fit_casimir(&residuals, selected_n, cal.c_el, cal.sigma_c_el(), constants)?;
    if !casimir.is_attractive() {
        return Err(Error::Convergence(format!(
            "extraction stage: fitted C_Cas = {:.3e} is not attractive (sign anomaly)",
            casimir.c_cas
        )));
    }
    let exponent = fit_free_exponent(&residuals, selected_n)?;
    let wedge = fit_wedge_deviation(&residuals, selected_n)?;

    let mut all_runs = calibration_runs.to_vec();
    all_runs.push(extraction_run.clone());
    let drift = fit_with_drift(
        &all_runs,
        all_runs.len() - 1,
        &dm,
        cal,
        casimir.c_cas,
        constants,
    )?;
    Ok(ExtractionOutcome {
        residuals,
        selection_trace,
        selected_n,
        casimir,
        casimir_fit,
        exponent,
        wedge,
        drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallelization_reaches_flat_plateau() {
        let cfg = CampaignConfig::default();
        let out = stage_parallelize(&cfg).unwrap();
        assert!(!out.aborted);
        // Residual tilt within the quoted bound, and the reading within
        // one bridge quantum of the flat maximum.
        assert!(out.residual_tilt[0].abs() <= 3e-5, "{:?}", out.residual_tilt);
        assert!(out.residual_tilt[1].abs() <= 3e-5, "{:?}", out.residual_tilt);
        assert!(out.flat_maximum - out.achieved_capacitance <= BRIDGE_RESOLUTION);
        // The trace only ever improves.
        for w in out.trace.windows(2) {
            assert!(w[1].capacitance >= w[0].capacitance);
        }
    }

    #[test]
    fn unquantized_parallelization_converges_tightly() {
        let cfg = CampaignConfig::default();
        let out = stage_parallelize_with(
            &cfg,
            &ParallelizeOptions {
                quantized: false,
                initial_step: 2.0e-4,
                min_step: 3.0e-9,
            },
        )
        .unwrap();
        assert!(out.residual_tilt[0].abs() < 1e-7, "{:?}", out.residual_tilt);
        assert!(out.residual_tilt[1].abs() < 1e-7, "{:?}", out.residual_tilt);
    }

    #[test]
    fn offset_stage_recovers_v0_and_meff() {
        let cfg = CampaignConfig::default();
        let out = stage_offset_voltage(&cfg, 42).unwrap();
        let truth = cfg.apparatus.offset_voltage_v0_true;
        assert!(
            (out.v0 - truth).abs() < 2.2e-3,
            "v0 = {} vs truth {truth}",
            out.v0
        );
        let m0 = cfg.apparatus.cantilever_physical_mass_m0;
        assert!(
            (out.m_eff / m0 - 0.30).abs() < 0.05,
            "m_eff/m0 = {}",
            out.m_eff / m0
        );
    }

    #[test]
    fn offset_stage_noise_budget_matches_quoted_scatter() {
        // The per-campaign scatter of the averaged V0 is about 2 mV.
        let mut estimates = Vec::new();
        for seed in 0..60u64 {
            let cfg = CampaignConfig::default();
            let out = stage_offset_voltage(&cfg, seed).unwrap();
            estimates.push(out.v0);
        }
        let n = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / n;
        let sd = (estimates.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0))
            .sqrt();
        assert!(sd > 0.4e-3 && sd < 4e-3, "scatter = {sd}");
    }

    #[test]
    fn calibration_stage_round_trip() {
        let cfg = CampaignConfig::default();
        let runs = simulate_calibration_runs(&cfg, 42).unwrap();
        assert_eq!(runs.len(), 3);
        let (cal, fit) = stage_calibrate(&cfg, -58e-3, &runs).unwrap();
        assert!(fit.converged);
        let app = &cfg.apparatus;
        assert!((cal.delta_nu2_offset - app.shift_offset_true).abs() < 1.0);
        assert!((cal.d0 - app.distance_correction_d0_true).abs() < 0.32e-7);
        assert!((cal.c_el - app.c_el_true()).abs() < 0.11e-13);
        assert!((cal.v0 - app.offset_voltage_v0_true).abs() < 1.7e-3);
    }

    #[test]
    fn extraction_stage_full_round_trip() {
        let cfg = CampaignConfig::default();
        let cal_runs = simulate_calibration_runs(&cfg, 42).unwrap();
        let ext_run = simulate_extraction_run(&cfg, 42).unwrap();
        let (cal, _) = stage_calibrate(&cfg, -58e-3, &cal_runs).unwrap();
        let out = stage_extract_casimir(&cfg, &cal, &cal_runs, &ext_run).unwrap();
        let truth = cfg.apparatus.c_cas_true();
        assert!(
            (out.casimir.c_cas - truth).abs() < 3.0 * out.casimir.sigma_c_cas,
            "c_cas = {:e} +- {:e} vs {truth:e}",
            out.casimir.c_cas,
            out.casimir.sigma_c_cas
        );
        // Eq-identity between K_C and the coefficients used.
        let kc = crate::physics::models::kc_from_coefficients(
            out.casimir.c_cas,
            cal.c_el,
            &cfg.apparatus.constants,
        )
        .unwrap();
        assert!((out.casimir.kc - kc).abs() / kc <= 1e-12);
        assert!(out.selected_n >= 5);
        assert!((out.exponent.exponent - 5.0).abs() < 3.0 * out.exponent.sigma_exponent + 0.4);
    }
}
