//! Corrections for a small deviation from plane-parallel geometry.
//!
//! The plates are modeled as a wedge: the local gap varies linearly across
//! the plate width, d(x) = d - theta*W/2 + theta*x, and each local strip
//! obeys the plane-parallel law. Averaging 1/d^p across the width is
//! integrable in closed form for every power appearing here (p = 5 for the
//! Casimir shift, p = 3 for the electrostatic shift, p = 1 for the
//! capacitance).

use super::constants::PhysicalConstants;
use super::types::WedgeGeometry;
use crate::error::{Error, Result};

/// Width-averaged value of (d(x)/d)^-p for a wedge with half-spread
/// h = |theta| W / (2 d), i.e. the ratio of the wedge-averaged law to the
/// flat-plate law at center gap d.
///
/// Closed forms:
///   p = 1: ln((1+h)/(1-h)) / (2h)
///   p = 3: 1 / (1-h^2)^2
///   p = 5: ((1-h)^-4 - (1+h)^-4) / (8h)
/// For small h the p = 1 and p = 5 forms cancel catastrophically, so a
/// series expansion takes over below h = 1e-4.
pub fn wedge_factor(p: u32, h: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&h) {
        return Err(Error::Contact(format!(
            "wedge half-spread h = {h} outside [0, 1); plates touch at the edge"
        )));
    }
    let h2 = h * h;
    Ok(match p {
        1 => {
            if h < 1e-4 {
                1.0 + h2 / 3.0 + h2 * h2 / 5.0 + h2 * h2 * h2 / 7.0
            } else {
                ((1.0 + h) / (1.0 - h)).ln() / (2.0 * h)
            }
        }
        3 => {
            let m = 1.0 - h2;
            1.0 / (m * m)
        }
        5 => {
            if h < 1e-4 {
                1.0 + 5.0 * h2 + 14.0 * h2 * h2 + 30.0 * h2 * h2 * h2
            } else {
                let a = (1.0 - h).powi(-4);
                let b = (1.0 + h).powi(-4);
                (a - b) / (8.0 * h)
            }
        }
        _ => {
            return Err(Error::Domain(format!(
                "wedge factor implemented for p in {{1,3,5}}, got {p}"
            )))
        }
    })
}

fn half_spread(d: f64, geometry: &WedgeGeometry) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::Domain(format!("gap must be positive, got {d}")));
    }
    let h = geometry.tilt_theta.abs() * geometry.plate_width_w / (2.0 * d);
    if h >= 1.0 {
        return Err(Error::Contact(format!(
            "tilt {:e} rad over {:e} m closes a {:e} m gap",
            geometry.tilt_theta, geometry.plate_width_w, d
        )));
    }
    Ok(h)
}

/// Width-averaged Casimir frequency shift -C_Cas <1/d^5> (Hz^2) for a
/// wedge centered on gap d. Converges to -C_Cas/d^5 as theta -> 0.
pub fn wedge_averaged_shift(d: f64, geometry: &WedgeGeometry, c_cas: f64) -> Result<f64> {
    let h = half_spread(d, geometry)?;
    let d3 = d * d * d;
    let d5 = d3 * d * d;
    Ok(-c_cas / d5 * wedge_factor(5, h)?)
}

/// Width-averaged electrostatic frequency shift factor applied to a wedge.
pub fn wedge_averaged_electrostatic_shift(
    d: f64,
    geometry: &WedgeGeometry,
    c_el: f64,
    v_r: f64,
) -> Result<f64> {
    let h = half_spread(d, geometry)?;
    let d3 = d * d * d;
    Ok(-c_el * v_r * v_r / d3 * wedge_factor(3, h)?)
}

/// Capacitance of two plates forming a wedge around center gap d (F):
/// eps0 L (1/theta) ln((d + theta W/2)/(d - theta W/2)), with the flat
/// limit eps0 L W / d as theta -> 0.
pub fn tilt_capacitance(
    d: f64,
    geometry: &WedgeGeometry,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let h = half_spread(d, geometry)?;
    let flat = constants.epsilon0 * geometry.plate_length_l * geometry.plate_width_w / d;
    Ok(flat * wedge_factor(1, h)?)
}
