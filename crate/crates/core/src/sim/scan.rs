//! Forward simulation of a gap scan: the dynamical frequency-shift
//! measurement as a function of PZT voltage.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::noise::{DriftConfig, NoiseConfig};
use super::plan::ScanPlan;
use super::rng;
use crate::error::{Error, Result};
use crate::physics::types::ApparatusConfig;
use crate::physics::wedge::wedge_factor;

/// One acquired point of a measurement run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub v_pzt: f64,
    pub v_c: f64,
    pub time: f64,
    /// Measured squared-frequency shift nu^2 - nu0^2 (Hz^2).
    pub delta_nu2: f64,
    pub sigma_delta_nu2: f64,
    /// Static deflection of the resonator, as read by the interferometer (m).
    pub d_s: f64,
}

/// A simulated (or loaded) measurement run: the unit of analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRun {
    pub label: String,
    pub seed: u64,
    pub points: Vec<ScanPoint>,
}

impl MeasurementRun {
    /// Bias voltage of the run; the scans here hold V_c fixed per run.
    pub fn bias(&self) -> f64 {
        self.points.first().map(|p| p.v_c).unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 4 {
            return Err(Error::Data(format!(
                "run '{}' has {} points; at least 4 are required for any fit",
                self.label,
                self.points.len()
            )));
        }
        if let Some(p) = self.points.iter().find(|p| !(p.sigma_delta_nu2 > 0.0)) {
            return Err(Error::Data(format!(
                "run '{}' has a non-positive shift error at V_PZT = {}",
                self.label, p.v_pzt
            )));
        }
        Ok(())
    }
}

/// Attractive force between the plates at gap `d` and residual bias `v_r`:
/// electrostatic plus Casimir contribution (N). Flat-plate law; wedge
/// corrections to the force are far below the interferometer resolution at
/// the residual tilts considered here.
fn plate_force(d: f64, v_r: f64, cfg: &ApparatusConfig, casimir_on: bool) -> f64 {
    let eps0 = cfg.constants.epsilon0;
    let s = cfg.plate_area_s;
    let mut f = 0.5 * eps0 * s * v_r * v_r / (d * d);
    if casimir_on {
        let d2 = d * d;
        f += cfg.casimir_kc_true * s / (d2 * d2);
    }
    f
}

/// One-shot estimate of the static deflection at a given true gap:
/// attractive force over modal stiffness, without the self-consistent
/// feedback. Used to seed gap targeting.
pub fn estimate_static_deflection(d: f64, v_r: f64, cfg: &ApparatusConfig, casimir_on: bool) -> f64 {
    plate_force(d, v_r, cfg, casimir_on) / cfg.stiffness()
}

/// Self-consistent static deflection at a given PZT setting.
///
/// The resonator bends toward the source by d_s = F(d)/k, which itself
/// shrinks the gap; iterate to the fixed point. Converges in well under
/// 20 iterations for every stable geometry; a diverging iteration means
/// the gap has no stable equilibrium (snap-in) and is reported as contact.
pub fn static_deflection_fixed_point(
    v_pzt: f64,
    v_r: f64,
    d0_true: f64,
    cfg: &ApparatusConfig,
    casimir_on: bool,
) -> Result<(f64, f64, usize)> {
    let stiffness = cfg.stiffness();
    let mut d_s = 0.0;
    for iteration in 1..=64 {
        let d = cfg.reference_distance_dr0 - cfg.actuation_coefficient_a * v_pzt - d_s + d0_true;
        if d <= 0.0 {
            return Err(Error::Contact(format!(
                "snap-in at V_PZT = {v_pzt} V: deflection closed the gap"
            )));
        }
        let d_s_next = plate_force(d, v_r, cfg, casimir_on) / stiffness;
        if (d_s_next - d_s).abs() < 1e-12 {
            let d = cfg.reference_distance_dr0 - cfg.actuation_coefficient_a * v_pzt - d_s_next
                + d0_true;
            return Ok((d_s_next, d, iteration));
        }
        d_s = d_s_next;
    }
    Err(Error::Contact(format!(
        "no stable deflection at V_PZT = {v_pzt} V (snap-in region)"
    )))
}

/// True squared-frequency shift at gap `d`, including the residual-wedge
/// averaging over both tilt axes.
fn true_shift(d: f64, v_r: f64, cfg: &ApparatusConfig, casimir_on: bool) -> Result<f64> {
    let side = cfg.plate_side();
    let h0 = cfg.residual_tilt[0].abs() * side / (2.0 * d);
    let h1 = cfg.residual_tilt[1].abs() * side / (2.0 * d);
    if h0 >= 1.0 || h1 >= 1.0 {
        return Err(Error::Contact("residual tilt closes the gap".into()));
    }
    let d3 = d * d * d;
    let d5 = d3 * d * d;
    let el = -cfg.c_el_true() * v_r * v_r / d3 * wedge_factor(3, h0)? * wedge_factor(3, h1)?;
    let cas = if casimir_on {
        -cfg.c_cas_true() / d5 * wedge_factor(5, h0)? * wedge_factor(5, h1)?
    } else {
        0.0
    };
    Ok(el + cas)
}

/// Simulate one gap scan.
///
/// For every step the static deflection is solved self-consistently, the
/// shift model is evaluated with the true coefficients (the Casimir term
/// only when `casimir_on`), and the constant shift offset, linear drift
/// and Gaussian noise of width 2 nu0 sigma_nu are applied.
pub fn run_gap_scan(
    cfg: &ApparatusConfig,
    plan: &ScanPlan,
    noise: &NoiseConfig,
    drift: &DriftConfig,
    casimir_on: bool,
    label: &str,
) -> Result<MeasurementRun> {
    cfg.validate()?;
    noise.validate()?;
    if plan.steps.is_empty() {
        return Err(Error::Config("scan plan has no steps".into()));
    }
    let seed = rng::derive_seed(noise.rng_seed, label);
    let mut stream = rng::stream(noise.rng_seed, label);
    let sigma = noise.shift_sigma(cfg.free_frequency_nu0);
    let gauss = Normal::new(0.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;

    let mut points = Vec::with_capacity(plan.steps.len());
    for (i, step) in plan.steps.iter().enumerate() {
        let t = plan.timestamp(i);
        let v_r = step.v_c - cfg.offset_voltage_v0_true;
        let d0_t = cfg.distance_correction_d0_true + drift.thermal_d0_drift * t;
        let (d_s, d, _) =
            static_deflection_fixed_point(step.v_pzt, v_r, d0_t, cfg, casimir_on)?;
        let mut value = true_shift(d, v_r, cfg, casimir_on)? - cfg.shift_offset_true
            + drift.shift_drift_rate * t;
        if sigma > 0.0 {
            value += sigma * gauss.sample(&mut stream);
        }
        points.push(ScanPoint {
            v_pzt: step.v_pzt,
            v_c: step.v_c,
            time: t,
            delta_nu2: value,
            sigma_delta_nu2: sigma,
            d_s,
        });
    }
    Ok(MeasurementRun {
        label: label.to_string(),
        seed,
        points,
    })
}
