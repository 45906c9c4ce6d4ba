//! The end-to-end campaign runner and its report.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::published::{self, PublishedValue};
use super::stages::{
    simulate_calibration_runs, simulate_extraction_run, stage_calibrate, stage_extract_casimir,
    stage_offset_voltage, stage_parallelize, ExtractionOutcome, OffsetOutcome,
    ParallelizationOutcome,
};
use super::CampaignConfig;
use crate::error::Result;
use crate::fit::lm::FitResult;
use crate::physics::types::CalibrationParams;
use crate::sim::scan::MeasurementRun;

/// One row of the published-versus-recovered table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub key: String,
    pub label: String,
    pub unit: String,
    pub published: f64,
    pub published_sigma: f64,
    pub recovered: f64,
    pub recovered_sigma: f64,
    /// Generative truth of this campaign (NaN when the row has none).
    pub truth: f64,
    /// (recovered - published) / sqrt(sigma_rec^2 + sigma_pub^2).
    pub pull_vs_published: f64,
    /// (recovered - truth) / sigma_rec; the honesty statistic.
    pub pull_vs_truth: f64,
    pub gated: bool,
    pub note: String,
}

impl ComparisonRow {
    fn build(p: &PublishedValue, recovered: f64, recovered_sigma: f64, truth: f64) -> Self {
        let combined = (recovered_sigma * recovered_sigma + p.sigma * p.sigma).sqrt();
        ComparisonRow {
            key: p.key.to_string(),
            label: p.label.to_string(),
            unit: p.unit.to_string(),
            published: p.value,
            published_sigma: p.sigma,
            recovered,
            recovered_sigma,
            truth,
            pull_vs_published: (recovered - p.value) / combined,
            pull_vs_truth: if truth.is_nan() || recovered_sigma == 0.0 {
                f64::NAN
            } else {
                (recovered - truth) / recovered_sigma
            },
            gated: p.gated,
            note: p.note.to_string(),
        }
    }
}

/// Everything a campaign produced, reconstructible from (config, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub seed: u64,
    pub config_hash: String,
    pub config: CampaignConfig,
    pub parallelization: Option<ParallelizationOutcome>,
    pub offset_stage: Option<OffsetOutcome>,
    pub calibration: Option<CalibrationParams>,
    pub calibration_fit: Option<FitResult>,
    pub extraction: Option<ExtractionOutcome>,
    pub comparison: Vec<ComparisonRow>,
    /// Per-stage failures; the report is still emitted when a stage fails.
    pub stage_errors: Vec<String>,
}

/// Stable hash of the campaign configuration.
pub fn config_hash(config: &CampaignConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Run every stage of the campaign against the simulator and assemble the
/// report, including the published-versus-recovered table with pulls.
pub fn reproduce_paper(config: &CampaignConfig, seed: u64) -> CampaignReport {
    let mut report = CampaignReport {
        seed,
        config_hash: config_hash(config),
        config: config.clone(),
        parallelization: None,
        offset_stage: None,
        calibration: None,
        calibration_fit: None,
        extraction: None,
        comparison: Vec::new(),
        stage_errors: Vec::new(),
    };
    if let Err(e) = config.validate() {
        report.stage_errors.push(format!("configuration: {e}"));
        return report;
    }

    match stage_parallelize(config) {
        Ok(out) => report.parallelization = Some(out),
        Err(e) => report.stage_errors.push(format!("parallelization: {e}")),
    }

    let v0_estimate = match stage_offset_voltage(config, seed) {
        Ok(out) => {
            let v0 = out.v0;
            report.offset_stage = Some(out);
            v0
        }
        Err(e) => {
            report.stage_errors.push(format!("offset voltage: {e}"));
            config.apparatus.offset_voltage_v0_true // fall back to proceed
        }
    };

    let mut calibration_runs: Vec<MeasurementRun> = Vec::new();
    match simulate_calibration_runs(config, seed) {
        Ok(runs) => match stage_calibrate(config, v0_estimate, &runs) {
            Ok((cal, fit)) => {
                calibration_runs = runs;
                report.calibration = Some(cal);
                report.calibration_fit = Some(fit);
            }
            Err(e) => report.stage_errors.push(format!("calibration: {e}")),
        },
        Err(e) => report.stage_errors.push(format!("calibration scans: {e}")),
    }

    if let Some(cal) = report.calibration.clone() {
        match simulate_extraction_run(config, seed) {
            Ok(run) => match stage_extract_casimir(config, &cal, &calibration_runs, &run) {
                Ok(out) => report.extraction = Some(out),
                Err(e) => report.stage_errors.push(format!("extraction: {e}")),
            },
            Err(e) => report.stage_errors.push(format!("extraction scan: {e}")),
        }
    }

    report.comparison = build_comparison(&report);
    report
}

fn build_comparison(report: &CampaignReport) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    let app = &report.config.apparatus;
    if let Some(cal) = &report.calibration {
        rows.push(ComparisonRow::build(
            &published::OFFSET,
            cal.delta_nu2_offset,
            cal.sigma_offset(),
            app.shift_offset_true,
        ));
        rows.push(ComparisonRow::build(
            &published::D0,
            cal.d0,
            cal.sigma_d0(),
            app.distance_correction_d0_true,
        ));
        rows.push(ComparisonRow::build(
            &published::C_EL,
            cal.c_el,
            cal.sigma_c_el(),
            app.c_el_true(),
        ));
        rows.push(ComparisonRow::build(
            &published::V0_DYNAMIC,
            cal.v0,
            cal.sigma_v0(),
            app.offset_voltage_v0_true,
        ));
    }
    if let Some(ext) = &report.extraction {
        rows.push(ComparisonRow::build(
            &published::C_CAS,
            ext.casimir.c_cas,
            ext.casimir.sigma_c_cas,
            app.c_cas_true(),
        ));
        rows.push(ComparisonRow::build(
            &published::KC,
            ext.casimir.kc,
            ext.casimir.sigma_kc,
            app.casimir_kc_true,
        ));
        rows.push(ComparisonRow::build(
            &published::EXPONENT,
            ext.exponent.exponent,
            ext.exponent.sigma_exponent,
            5.0,
        ));
        rows.push(ComparisonRow::build(
            &published::KC_DRIFT,
            ext.drift.casimir.kc,
            ext.drift.casimir.sigma_kc,
            app.casimir_kc_true,
        ));
        rows.push(ComparisonRow::build(
            &published::WEDGE,
            ext.wedge.deviation,
            ext.wedge.sigma_deviation,
            app.residual_tilt[0].abs() * app.plate_side(),
        ));
    }
    if let Some(off) = &report.offset_stage {
        rows.push(ComparisonRow::build(
            &published::V0_STATIC,
            off.v0,
            off.sigma_v0,
            app.offset_voltage_v0_true,
        ));
        rows.push(ComparisonRow::build(
            &published::MEFF_RATIO,
            off.m_eff / app.cantilever_physical_mass_m0,
            off.sigma_m_eff / app.cantilever_physical_mass_m0,
            app.effective_mass_meff / app.cantilever_physical_mass_m0,
        ));
    }
    rows
}

/// Plain-text rendering of the comparison table.
pub fn render_table(report: &CampaignReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "campaign seed {}  config {}\n",
        report.seed,
        &report.config_hash[..12]
    ));
    if let Some(p) = &report.parallelization {
        out.push_str(&format!(
            "parallelization: residual tilt [{:+.2e}, {:+.2e}] rad, reading {:.1} pF (flat max {:.2} pF)\n",
            p.residual_tilt[0],
            p.residual_tilt[1],
            p.achieved_capacitance * 1e12,
            p.flat_maximum * 1e12
        ));
    }
    if let (Some(cal_fit), Some(ext)) = (&report.calibration_fit, &report.extraction) {
        out.push_str(&format!(
            "chi2 probabilities: calibration {:.2}, {}-point extraction {:.2}, drift fit {:.2}\n",
            cal_fit.chi2_probability,
            ext.selected_n,
            ext.casimir_fit.chi2_probability,
            ext.drift.fit.chi2_probability
        ));
        out.push_str(&format!(
            "point selection: n = {} of {} (chi2-probability scan)\n",
            ext.selected_n,
            ext.residuals.points.len()
        ));
    }
    out.push('\n');
    out.push_str(&format!(
        "{:<38} {:>13} {:>13} {:>8} {:>8}  {}\n",
        "parameter", "published", "recovered", "z(pub)", "pull", "unit"
    ));
    for row in &report.comparison {
        out.push_str(&format!(
            "{:<38} {:>13} {:>13} {:>8.2} {:>8}  {}{}\n",
            row.label,
            format_value(row.published, row.published_sigma),
            format_value(row.recovered, row.recovered_sigma),
            row.pull_vs_published,
            if row.pull_vs_truth.is_nan() {
                "-".to_string()
            } else {
                format!("{:+.2}", row.pull_vs_truth)
            },
            row.unit,
            if row.gated { "" } else { "  [cross-check]" }
        ));
    }
    if !report.stage_errors.is_empty() {
        out.push_str("\nstage errors:\n");
        for e in &report.stage_errors {
            out.push_str(&format!("  {e}\n"));
        }
    }
    out
}

fn format_value(v: f64, s: f64) -> String {
    if v == 0.0 && s > 0.0 {
        return format!("0 ± {s:.1e}");
    }
    let mag = v.abs().max(f64::MIN_POSITIVE);
    if (1e-2..1e4).contains(&mag) {
        format!("{v:.3} ± {s:.3}")
    } else {
        format!("{v:.3e} ± {s:.2e}")
    }
}

/// Convenience wrapper: the default configuration at the given seed.
pub fn reproduce_paper_default(seed: u64) -> Result<CampaignReport> {
    let config = CampaignConfig::default();
    config.validate()?;
    Ok(reproduce_paper(&config, seed))
}
