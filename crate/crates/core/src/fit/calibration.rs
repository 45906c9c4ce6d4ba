//! Global electrostatic calibration: a simultaneous fit of
//! {shift offset, d0, C_el, V0} to several large-bias gap scans.

use serde::{Deserialize, Serialize};

use super::lm::{lm_fit, FitResult, LeastSquaresModel, LmOptions};
use crate::error::{Error, Result};
use crate::physics::types::CalibrationParams;
use crate::sim::scan::MeasurementRun;

/// What the analyst knows about the distance scale: the nominal reference
/// distance and the independently calibrated actuation coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceModel {
    pub reference_distance_dr0: f64,
    pub actuation_coefficient_a: f64,
}

impl DistanceModel {
    /// Nominal relative displacement d_r for a recorded point.
    pub fn d_r(&self, v_pzt: f64, d_s: f64) -> f64 {
        self.reference_distance_dr0 - self.actuation_coefficient_a * v_pzt - d_s
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationOptions {
    /// Initial guess for the offset voltage, typically the deflection-stage
    /// estimate.
    pub v0_initial: f64,
    /// Fit a single shift offset shared by all runs (the default), or one
    /// offset per run.
    pub shared_offset: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            v0_initial: -60e-3,
            shared_offset: true,
        }
    }
}

struct FlatPoint {
    run: usize,
    d_r: f64,
    value: f64,
    sigma: f64,
    v_c: f64,
}

/// Parameter layout: [offset_0, ..., offset_{k-1}, d0, c_el, v0] where
/// k = 1 for a shared offset.
struct CalibrationModel {
    points: Vec<FlatPoint>,
    offsets: usize,
}

impl CalibrationModel {
    fn gap(&self, p: &[f64], i: usize) -> f64 {
        self.points[i].d_r + p[self.offsets]
    }
}

impl LeastSquaresModel for CalibrationModel {
    fn residual_count(&self) -> usize {
        self.points.len()
    }
    fn param_count(&self) -> usize {
        self.offsets + 3
    }
    fn residual(&self, p: &[f64], i: usize) -> f64 {
        let pt = &self.points[i];
        let d = self.gap(p, i);
        if d <= 1e-9 {
            // Barrier: reject steps that close the gap.
            return 1e12 * (1.0 + (1e-9 - d) * 1e9);
        }
        let offset = p[if self.offsets == 1 { 0 } else { pt.run }];
        let c_el = p[self.offsets + 1];
        let v_r = pt.v_c - p[self.offsets + 2];
        let model = -offset - c_el * v_r * v_r / (d * d * d);
        (pt.value - model) / pt.sigma
    }
    fn jacobian_row(&self, p: &[f64], i: usize, out: &mut [f64]) -> bool {
        let pt = &self.points[i];
        let d = self.gap(p, i);
        if d <= 1e-9 {
            return false;
        }
        let c_el = p[self.offsets + 1];
        let v_r = pt.v_c - p[self.offsets + 2];
        let d3 = d * d * d;
        let d4 = d3 * d;
        out.fill(0.0);
        // d residual / d param = -(d model / d param)/sigma
        let offset_slot = if self.offsets == 1 { 0 } else { pt.run };
        out[offset_slot] = 1.0 / pt.sigma;
        out[self.offsets] = -(3.0 * c_el * v_r * v_r / d4) / pt.sigma;
        out[self.offsets + 1] = (v_r * v_r / d3) / pt.sigma;
        out[self.offsets + 2] = -(2.0 * c_el * v_r / d3) / pt.sigma;
        true
    }
    fn param_scales(&self) -> Vec<f64> {
        let mut s = vec![1.0; self.param_count()];
        s[self.offsets] = 1e-7;
        s[self.offsets + 1] = 1e-13;
        s[self.offsets + 2] = 1e-2;
        s
    }
}

/// Simultaneously fit the calibration parameters across several runs taken
/// at distinct bias voltages.
pub fn fit_calibration_global(
    runs: &[MeasurementRun],
    dm: &DistanceModel,
    opts: &CalibrationOptions,
) -> Result<(CalibrationParams, FitResult)> {
    if runs.is_empty() {
        return Err(Error::Data("no calibration runs".into()));
    }
    for run in runs {
        run.validate()?;
    }
    let mut biases: Vec<f64> = runs.iter().map(|r| r.bias()).collect();
    biases.sort_by(f64::total_cmp);
    biases.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if biases.len() < 2 {
        return Err(Error::Identifiability(
            "all calibration runs share one bias voltage; C_el and V_0 are degenerate".into(),
        ));
    }

    let mut points = Vec::new();
    for (run_idx, run) in runs.iter().enumerate() {
        for p in &run.points {
            points.push(FlatPoint {
                run: run_idx,
                d_r: dm.d_r(p.v_pzt, p.d_s),
                value: p.delta_nu2,
                sigma: p.sigma_delta_nu2,
                v_c: p.v_c,
            });
        }
    }
    let offsets = if opts.shared_offset { 1 } else { runs.len() };
    let model = CalibrationModel { points, offsets };

    // Initialization: two-point estimate of C_el on the run with the
    // largest residual bias, offset from the far end, d0 from zero.
    let far_run = runs
        .iter()
        .max_by(|a, b| {
            (a.bias() - opts.v0_initial)
                .abs()
                .total_cmp(&(b.bias() - opts.v0_initial).abs())
        })
        .unwrap();
    let first = far_run.points.first().unwrap();
    let last = far_run.points.last().unwrap();
    let (d_far, y_far) = (dm.d_r(first.v_pzt, first.d_s), first.delta_nu2);
    let (d_near, y_near) = (dm.d_r(last.v_pzt, last.d_s), last.delta_nu2);
    let v_r0 = far_run.bias() - opts.v0_initial;
    let b_init = ((y_far - y_near) / (1.0 / d_near.powi(3) - 1.0 / d_far.powi(3))).abs();
    let c_el_init = (b_init / (v_r0 * v_r0)).max(1e-15);
    let offset_init = -(y_far + b_init / d_far.powi(3));

    let mut initial = vec![offset_init; offsets];
    initial.push(0.0);
    initial.push(c_el_init);
    initial.push(opts.v0_initial);

    let fit = lm_fit(&model, &initial, &LmOptions::default())?;
    if !fit.converged {
        return Err(Error::Convergence(format!(
            "calibration fit hit the iteration cap at chi2 = {:.3}",
            fit.chi2
        )));
    }

    // Map to the 4-parameter record. With per-run offsets, report their
    // mean and fold the spread into its variance.
    let k = offsets;
    let (offset, offset_var) = if k == 1 {
        (fit.params[0], fit.covariance[0][0])
    } else {
        let mean = fit.params[..k].iter().sum::<f64>() / k as f64;
        let mut var = 0.0;
        for i in 0..k {
            for j in 0..k {
                var += fit.covariance[i][j];
            }
        }
        (mean, var / (k * k) as f64)
    };
    let mut covariance = [[0.0; 4]; 4];
    covariance[0][0] = offset_var;
    for (a, ia) in [(1usize, k), (2, k + 1), (3, k + 2)] {
        // offset cross terms: average the per-offset covariances
        let mut acc = 0.0;
        for i in 0..k {
            acc += fit.covariance[i][ia];
        }
        covariance[0][a] = acc / k as f64;
        covariance[a][0] = covariance[0][a];
        for (b, ib) in [(1usize, k), (2, k + 1), (3, k + 2)] {
            covariance[a][b] = fit.covariance[ia][ib];
            covariance[b][a] = fit.covariance[ib][ia];
        }
    }
    let cal = CalibrationParams {
        delta_nu2_offset: offset,
        d0: fit.params[k],
        c_el: fit.params[k + 1],
        v0: fit.params[k + 2],
        covariance,
    };
    cal.validate()?;
    Ok((cal, fit))
}
