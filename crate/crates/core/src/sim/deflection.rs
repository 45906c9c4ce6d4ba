//! Static deflection sweeps: dc interferometer readings versus bias
//! voltage, interleaved with zero-bias readings so slow laser drift can be
//! cancelled by differencing.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::noise::NoiseConfig;
use super::rng;
use crate::error::{Error, Result};
use crate::physics::models::static_deflection;
use crate::physics::types::ApparatusConfig;

/// One dc reading of the interferometer output (V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeflectionReading {
    /// Index into the sweep's distance list.
    pub distance_index: usize,
    /// Applied bias (V); zero-bias reference readings have `v_c = 0`.
    pub v_c: f64,
    /// Interferometer output (V).
    pub output_v: f64,
    /// True if this is a zero-bias reference reading.
    pub reference: bool,
}

/// A full deflection campaign over several gap distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectionSweep {
    /// Nominal gap distances d_i (m).
    pub distances: Vec<f64>,
    /// Bias list applied at every distance (V).
    pub biases: Vec<f64>,
    pub readings: Vec<DeflectionReading>,
    pub seed: u64,
}

impl DeflectionSweep {
    /// Drift-cancelled deflection signal for each (distance, bias): the
    /// biased reading minus the mean of its two bracketing zero-bias
    /// readings. Exact for drift linear in reading index.
    pub fn differenced(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        let readings = &self.readings;
        for i in 0..readings.len() {
            let r = readings[i];
            if r.reference {
                continue;
            }
            let prev = readings[..i].iter().rev().find(|x| {
                x.reference && x.distance_index == r.distance_index
            });
            let next = readings[i..]
                .iter()
                .find(|x| x.reference && x.distance_index == r.distance_index);
            let baseline = match (prev, next) {
                (Some(a), Some(b)) => 0.5 * (a.output_v + b.output_v),
                (Some(a), None) => a.output_v,
                (None, Some(b)) => b.output_v,
                (None, None) => 0.0,
            };
            out.push((r.distance_index, r.v_c, r.output_v - baseline));
        }
        out
    }
}

/// Simulate the deflection campaign: for each distance, alternate zero-bias
/// and biased dc readings while the laser level random-walks underneath.
pub fn run_deflection_sweep(
    cfg: &ApparatusConfig,
    distances: &[f64],
    biases: &[f64],
    noise: &NoiseConfig,
) -> Result<DeflectionSweep> {
    cfg.validate()?;
    noise.validate()?;
    if distances.iter().any(|&d| d <= 0.0) {
        return Err(Error::Domain("distances must be positive".into()));
    }
    if biases.is_empty() || distances.is_empty() {
        return Err(Error::Config("empty deflection sweep".into()));
    }
    let seed = rng::derive_seed(noise.rng_seed, "deflection");
    let mut stream = rng::stream(noise.rng_seed, "deflection");
    let gauss = Normal::new(0.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut laser_v = 0.0;
    let mut readings = Vec::new();

    let mut read = |v_c: f64,
                    d: f64,
                    idx: usize,
                    reference: bool,
                    laser_v: &mut f64,
                    stream: &mut rand_chacha::ChaCha12Rng|
     -> Result<()> {
        *laser_v += noise.laser_drift_step * gauss.sample(stream);
        let deflection = static_deflection(v_c, d, cfg)?;
        let mut out = deflection / cfg.interferometer_sensitivity + *laser_v;
        if noise.deflection_reading_sigma > 0.0 {
            out += noise.deflection_reading_sigma * gauss.sample(stream);
        }
        readings.push(DeflectionReading {
            distance_index: idx,
            v_c,
            output_v: out,
            reference,
        });
        Ok(())
    };

    for (idx, &d) in distances.iter().enumerate() {
        read(0.0, d, idx, true, &mut laser_v, &mut stream)?;
        for &v_c in biases {
            read(v_c, d, idx, false, &mut laser_v, &mut stream)?;
            read(0.0, d, idx, true, &mut laser_v, &mut stream)?;
        }
    }
    Ok(DeflectionSweep {
        distances: distances.to_vec(),
        biases: biases.to_vec(),
        readings,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_readings_follow_the_parabola() {
        let cfg = ApparatusConfig::default();
        let noise = NoiseConfig {
            deflection_reading_sigma: 0.0,
            laser_drift_step: 0.0,
            ..NoiseConfig::default()
        };
        let sweep =
            run_deflection_sweep(&cfg, &[4e-6, 6e-6], &[-0.2, -0.1, 0.05], &noise).unwrap();
        // Raw readings are K_i (V_c - V_0)^2 / sensitivity, exactly.
        for r in &sweep.readings {
            let expected = static_deflection(r.v_c, sweep.distances[r.distance_index], &cfg)
                .unwrap()
                / cfg.interferometer_sensitivity;
            assert!((r.output_v - expected).abs() < 1e-12);
        }
        // Differenced signals subtract the zero-bias deflection K_i V_0^2.
        for (idx, v_c, signal) in sweep.differenced() {
            let d = sweep.distances[idx];
            let expected = (static_deflection(v_c, d, &cfg).unwrap()
                - static_deflection(0.0, d, &cfg).unwrap())
                / cfg.interferometer_sensitivity;
            assert!((signal - expected).abs() < 1e-12, "{signal} vs {expected}");
        }
    }

    #[test]
    fn differencing_cancels_linear_drift() {
        // Replace the random walk by a strictly linear ramp and check the
        // bracketing-mean difference removes it entirely.
        let cfg = ApparatusConfig::default();
        let noise = NoiseConfig {
            deflection_reading_sigma: 0.0,
            laser_drift_step: 0.0,
            ..NoiseConfig::default()
        };
        let mut sweep = run_deflection_sweep(&cfg, &[5e-6], &[-0.15, -0.05, 0.1], &noise).unwrap();
        for (i, r) in sweep.readings.iter_mut().enumerate() {
            r.output_v += 0.37 * i as f64; // large linear drift
        }
        for (idx, v_c, signal) in sweep.differenced() {
            let d = sweep.distances[idx];
            let expected = (static_deflection(v_c, d, &cfg).unwrap()
                - static_deflection(0.0, d, &cfg).unwrap())
                / cfg.interferometer_sensitivity;
            assert!(
                (signal - expected).abs() < 1e-9,
                "drift leaked: {signal} vs {expected}"
            );
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = ApparatusConfig::default();
        let noise = NoiseConfig::default();
        let a = run_deflection_sweep(&cfg, &[5e-6], &[-0.1, 0.1], &noise).unwrap();
        let b = run_deflection_sweep(&cfg, &[5e-6], &[-0.1, 0.1], &noise).unwrap();
        assert_eq!(a, b);
    }
}
