//! Capacitance readings of the plate pair under tilt, as seen by the ac
//! bridge during parallelization.

use crate::error::{Error, Result};
use crate::physics::types::{ApparatusConfig, WedgeGeometry};
use crate::physics::wedge::tilt_capacitance;

/// Resolution of the ac bridge (F); readings are quantized to this step.
pub const BRIDGE_RESOLUTION: f64 = 0.4e-12;

pub fn quantize(c: f64) -> f64 {
    (c / BRIDGE_RESOLUTION).round() * BRIDGE_RESOLUTION
}

/// Capacitance at tilt angles `(theta_w, theta_l)` with the approach
/// stopped at `closest_gap` between the nearest plate edges.
///
/// The two tilt axes are treated as independent wedges combined
/// multiplicatively. Holding the closest gap (rather than the center gap)
/// fixed encodes the contact constraint of the physical procedure: the
/// plates are driven as near as the closest edge allows, so any tilt
/// pushes the bulk of the plate area away and lowers the reading. The
/// flat, untilted configuration maximizes it.
pub fn capacitance_at_tilt(
    cfg: &ApparatusConfig,
    tilt: [f64; 2],
    closest_gap: f64,
    quantized: bool,
) -> Result<f64> {
    if closest_gap <= 0.0 {
        return Err(Error::Contact(format!(
            "closest gap must be positive, got {closest_gap}"
        )));
    }
    let side = cfg.plate_side();
    let d_center = closest_gap + 0.5 * (tilt[0].abs() + tilt[1].abs()) * side;
    let flat = cfg.constants.epsilon0 * cfg.plate_area_s / d_center;
    let mut c = flat;
    for theta in tilt {
        let g = WedgeGeometry::new(theta, side, side)?;
        c *= tilt_capacitance(d_center, &g, &cfg.constants)? / flat;
    }
    Ok(if quantized { quantize(c) } else { c })
}

/// Evaluate the bridge reading over a grid of tilt pairs.
pub fn map_capacitance(
    cfg: &ApparatusConfig,
    tilt_grid: &[[f64; 2]],
    closest_gap: f64,
) -> Result<Vec<f64>> {
    tilt_grid
        .iter()
        .map(|&t| capacitance_at_tilt(cfg, t, closest_gap, true))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_step_is_exact() {
        assert_eq!(quantize(22.19e-12), 22.0e-12);
        assert_eq!(quantize(22.21e-12), 22.4e-12);
        let c = quantize(31.87e-12);
        assert!((c / BRIDGE_RESOLUTION).fract().abs() < 1e-9);
    }

    #[test]
    fn map_maximum_at_zero_tilt() {
        let cfg = ApparatusConfig::default();
        let mut grid = Vec::new();
        for i in -3..=3 {
            for j in -3..=3 {
                grid.push([i as f64 * 2e-5, j as f64 * 2e-5]);
            }
        }
        // Unquantized map has a strict maximum at zero tilt.
        let values: Vec<f64> = grid
            .iter()
            .map(|&t| capacitance_at_tilt(&cfg, t, 0.4e-6, false).unwrap())
            .collect();
        let (imax, _) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(grid[imax], [0.0, 0.0]);
        // Quantized map peaks there too (ties allowed within a step).
        let q = map_capacitance(&cfg, &grid, 0.4e-6).unwrap();
        let qmax = q.iter().cloned().fold(f64::MIN, f64::max);
        let center = q[grid.iter().position(|&t| t == [0.0, 0.0]).unwrap()];
        assert_eq!(center, qmax);
    }

    #[test]
    fn contact_rejected() {
        let cfg = ApparatusConfig::default();
        assert!(map_capacitance(&cfg, &[[0.0, 0.0]], 0.0).is_err());
    }
}
