//! Closed-form laws of the experiment: vacuum pressure, electrostatic
//! deflection, the combined frequency-shift model, the gap/actuation map,
//! and the coefficient relation that yields K_C.
//!
//! Everything here is a pure function of its arguments.

use super::constants::PhysicalConstants;
use super::types::ApparatusConfig;
use crate::error::{Error, Result};

/// Vacuum pressure K_C/d^4 between ideal parallel conducting plates (Pa).
pub fn casimir_pressure(d: f64, constants: &PhysicalConstants) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::Domain(format!("gap must be positive, got {d}")));
    }
    Ok(constants.kc_theory() / d.powi(4))
}

/// Static deflection K_i (V_c - V_0)^2 of the cantilever edge (m) under a
/// bias V_c (V) at gap d, with K_i = eps0 S / (8 pi^2 m_eff nu0^2 d^2).
pub fn static_deflection(v_c: f64, d: f64, cfg: &ApparatusConfig) -> Result<f64> {
    let k_i = deflection_coefficient(d, cfg)?;
    let v_r = v_c - cfg.offset_voltage_v0_true;
    Ok(k_i * v_r * v_r)
}

/// The quadratic coefficient K_i of the static deflection law (m/V^2).
///
/// Identical to F_el/(k V_r^2) with k the modal stiffness: the deflection
/// is the electrostatic force divided by the effective spring constant.
pub fn deflection_coefficient(d: f64, cfg: &ApparatusConfig) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::Domain(format!("gap must be positive, got {d}")));
    }
    let eight_pi2 = 8.0 * std::f64::consts::PI * std::f64::consts::PI;
    let nu0 = cfg.free_frequency_nu0;
    Ok(cfg.constants.epsilon0 * cfg.plate_area_s
        / (eight_pi2 * cfg.effective_mass_meff * nu0 * nu0 * d * d))
}

/// Squared-frequency shift -C_el V_r^2/d^3 - C_Cas/d^5 (Hz^2) at gap d
/// and residual bias V_r (V).
pub fn frequency_shift_model(d: f64, v_r: f64, c_el: f64, c_cas: f64) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::Domain(format!("gap must be positive, got {d}")));
    }
    let d3 = d * d * d;
    let d5 = d3 * d * d;
    Ok(-c_el * v_r * v_r / d3 - c_cas / d5)
}

/// Gap separation d_r^0 - A V_PZT - d_s + d_0 (m).
///
/// `d_s` is the static bending of the resonator toward the source and `d0`
/// the additive scale correction; with `d0 = 0` this is the nominal
/// relative displacement d_r.
pub fn gap_distance(v_pzt: f64, d_s: f64, cfg: &ApparatusConfig, d0: f64) -> Result<f64> {
    let d = cfg.reference_distance_dr0 - cfg.actuation_coefficient_a * v_pzt - d_s + d0;
    if d <= 0.0 {
        return Err(Error::Contact(format!(
            "gap {d:.3e} m at V_PZT = {v_pzt} V; plates touched"
        )));
    }
    Ok(d)
}

/// Pressure coefficient K_C = (eps0/4) C_Cas/C_el (N m^2).
pub fn kc_from_coefficients(c_cas: f64, c_el: f64, constants: &PhysicalConstants) -> Result<f64> {
    if c_el <= 0.0 {
        return Err(Error::Domain(format!("C_el must be positive, got {c_el}")));
    }
    Ok(0.25 * constants.epsilon0 * c_cas / c_el)
}

/// Standard deviation of K_C propagated from the coefficient errors,
/// including an optional correlation rho between C_Cas and C_el.
pub fn kc_sigma(
    kc: f64,
    c_cas: f64,
    sigma_c_cas: f64,
    c_el: f64,
    sigma_c_el: f64,
    rho: f64,
) -> f64 {
    let ra = sigma_c_cas / c_cas;
    let rb = sigma_c_el / c_el;
    let var = ra * ra + rb * rb - 2.0 * rho * ra * rb;
    kc.abs() * var.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::types::{DEFAULT_C_CAS_TRUE, DEFAULT_C_EL_TRUE};

    const CONSTANTS: PhysicalConstants = PhysicalConstants {
        planck_h: 6.626_070_15e-34,
        speed_of_light_c: 299_792_458.0,
        epsilon0: 8.854_187_8128e-12,
    };

    #[test]
    fn pressure_at_one_micron() {
        // Oracle: direct evaluation of K_C/d^4, K_C quoted as 1.3e-27 N m^2.
        let p = casimir_pressure(1e-6, &CONSTANTS).unwrap();
        assert!((p - 1.3e-3).abs() / 1.3e-3 < 0.01, "p = {p:e}");
        assert!((p - CONSTANTS.kc_theory() / 1e-24).abs() / p < 1e-14);
    }

    #[test]
    fn pressure_quartic_scaling() {
        let p1 = casimir_pressure(1e-6, &CONSTANTS).unwrap();
        let p2 = casimir_pressure(2e-6, &CONSTANTS).unwrap();
        assert!((p1 / p2 - 16.0).abs() < 1e-12);
        let p_half = casimir_pressure(0.5e-6, &CONSTANTS).unwrap();
        // 16x the 1 um value, i.e. about 2.08e-2 Pa.
        assert!((p_half - 16.0 * p1).abs() / p_half < 1e-14);
        assert!((p_half - 2.08e-2).abs() / 2.08e-2 < 0.01);
    }

    #[test]
    fn pressure_rejects_nonpositive_gap() {
        assert!(casimir_pressure(0.0, &CONSTANTS).is_err());
        assert!(casimir_pressure(-1e-6, &CONSTANTS).is_err());
    }

    #[test]
    fn deflection_vanishes_at_cancelling_bias() {
        let cfg = ApparatusConfig::default();
        for d in [0.5e-6, 1e-6, 5e-6] {
            let x = static_deflection(cfg.offset_voltage_v0_true, d, &cfg).unwrap();
            assert_eq!(x, 0.0);
        }
    }

    #[test]
    fn deflection_quadratic_scaling_and_symmetry() {
        let cfg = ApparatusConfig::default();
        let v0 = cfg.offset_voltage_v0_true;
        let d = 2e-6;
        let x1 = static_deflection(v0 + 0.05, d, &cfg).unwrap();
        let x2 = static_deflection(v0 + 0.10, d, &cfg).unwrap();
        assert!((x2 / x1 - 4.0).abs() < 1e-12);
        // Even about the vertex, exactly: pick a binary-representable
        // offset voltage so V_0 +- u carries no rounding.
        let mut cfg2 = cfg.clone();
        cfg2.offset_voltage_v0_true = -0.0625;
        let left = static_deflection(-0.0625 - 0.25, d, &cfg2).unwrap();
        let right = static_deflection(-0.0625 + 0.25, d, &cfg2).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn deflection_coefficient_matches_force_over_stiffness() {
        let cfg = ApparatusConfig::default();
        let d = 1.5e-6;
        let v_r = 0.1456;
        // Independent route: electrostatic plate force over modal stiffness.
        let force = 0.5 * cfg.constants.epsilon0 * cfg.plate_area_s * v_r * v_r / (d * d);
        let expected = force / cfg.stiffness();
        let got = deflection_coefficient(d, &cfg).unwrap() * v_r * v_r;
        assert!((got - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn shift_model_pure_casimir_term() {
        // -C_Cas/d^5 at d = 1 um with the pinned coefficient: -234 Hz^2.
        let s = frequency_shift_model(1e-6, 0.0, DEFAULT_C_EL_TRUE, DEFAULT_C_CAS_TRUE).unwrap();
        assert!((s + 234.0).abs() < 1e-9, "s = {s}");
        // Both coefficients zero: no shift at any gap.
        for d in [0.3e-6, 1e-6, 9e-6] {
            assert_eq!(frequency_shift_model(d, 0.0, 0.0, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn shift_model_electrostatic_dominates_at_three_microns() {
        // Oracle: direct evaluation at d = 3 um, V_r = 77.0 mV with the
        // fitted coefficients. Electrostatic term -93.1 Hz^2, Casimir term
        // -0.963 Hz^2; the electrostatic part dominates by ~97x.
        let d = 3e-6;
        let v_r = 0.1372 - 0.0602;
        let el = frequency_shift_model(d, v_r, DEFAULT_C_EL_TRUE, 0.0).unwrap();
        let cas = frequency_shift_model(d, 0.0, DEFAULT_C_EL_TRUE, DEFAULT_C_CAS_TRUE).unwrap();
        assert!((el + 93.10725925925926).abs() < 1e-9, "el = {el}");
        assert!((cas + 0.9629629629629629).abs() < 1e-12, "cas = {cas}");
        assert!(el.abs() / cas.abs() > 90.0);
        let total = frequency_shift_model(d, v_r, DEFAULT_C_EL_TRUE, DEFAULT_C_CAS_TRUE).unwrap();
        assert!((total - (el + cas)).abs() < 1e-12);
    }

    #[test]
    fn shift_model_nonpositive_for_nonnegative_coefficients() {
        for d in [0.4e-6, 1e-6, 4e-6] {
            for v_r in [0.0, 0.05, -0.2] {
                let s = frequency_shift_model(d, v_r, DEFAULT_C_EL_TRUE, DEFAULT_C_CAS_TRUE).unwrap();
                assert!(s <= 0.0);
            }
        }
    }

    #[test]
    fn gap_distance_arithmetic() {
        let cfg = ApparatusConfig::default();
        assert_eq!(gap_distance(0.0, 0.0, &cfg, 0.0).unwrap(), 1.2e-5);
        let d = gap_distance(0.0, 0.0, &cfg, -3.30e-7).unwrap();
        assert!((d - 1.167e-5).abs() < 1e-20);
        // Oracle: plain arithmetic with the published constants,
        // 1.2e-5 - 1.508e-7*70 - 0 + (-3.30e-7) = 1.114e-6 m.
        let d = gap_distance(70.0, 0.0, &cfg, -3.30e-7).unwrap();
        assert!((d - 1.114e-6).abs() < 1e-18, "d = {d:e}");
    }

    #[test]
    fn gap_distance_contact_error() {
        let cfg = ApparatusConfig::default();
        // 12 um of travel needs ~79.6 V; beyond that the plates touch.
        assert!(matches!(
            gap_distance(80.0, 0.0, &cfg, 0.0),
            Err(Error::Contact(_))
        ));
    }

    #[test]
    fn kc_from_published_coefficients() {
        let kc = kc_from_coefficients(DEFAULT_C_CAS_TRUE, DEFAULT_C_EL_TRUE, &CONSTANTS).unwrap();
        assert!((kc - 1.22e-27).abs() / 1.22e-27 < 0.01, "kc = {kc:e}");
        assert_eq!(kc_from_coefficients(0.0, DEFAULT_C_EL_TRUE, &CONSTANTS).unwrap(), 0.0);
        assert!(kc_from_coefficients(1.0, 0.0, &CONSTANTS).is_err());
    }

    #[test]
    fn kc_ratio_invariance() {
        let kc1 = kc_from_coefficients(DEFAULT_C_CAS_TRUE, DEFAULT_C_EL_TRUE, &CONSTANTS).unwrap();
        let kc2 =
            kc_from_coefficients(7.0 * DEFAULT_C_CAS_TRUE, 7.0 * DEFAULT_C_EL_TRUE, &CONSTANTS)
                .unwrap();
        assert!((kc1 - kc2).abs() / kc1 < 1e-14);
    }

    #[test]
    fn kc_sigma_matches_quoted_error_budget() {
        // Relative-error propagation on the published values reproduces the
        // quoted 0.18e-27 N m^2 uncertainty.
        let kc = kc_from_coefficients(DEFAULT_C_CAS_TRUE, DEFAULT_C_EL_TRUE, &CONSTANTS).unwrap();
        let sigma = kc_sigma(kc, DEFAULT_C_CAS_TRUE, 0.34e-28, DEFAULT_C_EL_TRUE, 0.11e-13, 0.0);
        assert!((sigma - 0.18e-27).abs() / 0.18e-27 < 0.05, "sigma = {sigma:e}");
    }
}
