use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One acquisition step of a gap scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanStep {
    /// Voltage applied to the linear PZT (V).
    pub v_pzt: f64,
    /// Counterbias applied between the plates (V).
    pub v_c: f64,
    /// Acquisition time spent on this step (s).
    pub dwell_time: f64,
}

/// An ordered gap-scan plan.
///
/// PZT voltages must be strictly increasing (the scan only ever approaches,
/// never retracts, to stay clear of actuator hysteresis) and the total
/// acquisition time must stay within the budget that keeps slow drifts
/// manageable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub steps: Vec<ScanStep>,
    /// Clock offset of the first step (s).
    pub start_time: f64,
    /// Acquisition budget (s).
    pub budget: f64,
}

pub const DEFAULT_ACQUISITION_BUDGET: f64 = 2400.0;

impl ScanPlan {
    pub fn new(steps: Vec<ScanStep>, start_time: f64, budget: f64) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Config("scan plan has no steps".into()));
        }
        let mut total = 0.0;
        for (i, s) in steps.iter().enumerate() {
            if s.dwell_time <= 0.0 {
                return Err(Error::Config(format!("step {i}: dwell time must be positive")));
            }
            total += s.dwell_time;
            if i > 0 && steps[i - 1].v_pzt >= s.v_pzt {
                return Err(Error::Config(format!(
                    "step {i}: V_PZT must be strictly increasing ({} then {})",
                    steps[i - 1].v_pzt, s.v_pzt
                )));
            }
        }
        if total > budget {
            return Err(Error::Config(format!(
                "plan takes {total} s, exceeding the {budget} s acquisition budget"
            )));
        }
        Ok(ScanPlan {
            steps,
            start_time,
            budget,
        })
    }

    /// Timestamp of step `i`: the clock at the end of its dwell.
    pub fn timestamp(&self, i: usize) -> f64 {
        self.start_time
            + self.steps[..=i]
                .iter()
                .map(|s| s.dwell_time)
                .sum::<f64>()
    }

    pub fn duration(&self) -> f64 {
        self.steps.iter().map(|s| s.dwell_time).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(v: f64) -> ScanStep {
        ScanStep {
            v_pzt: v,
            v_c: -0.0686,
            dwell_time: 64.0,
        }
    }

    #[test]
    fn rejects_non_monotone_voltages() {
        let err = ScanPlan::new(vec![step(1.0), step(0.5)], 0.0, 2400.0);
        assert!(matches!(err, Err(Error::Config(_))));
        let err = ScanPlan::new(vec![step(1.0), step(1.0)], 0.0, 2400.0);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_budget_overrun() {
        let steps: Vec<_> = (0..40).map(|i| step(i as f64)).collect();
        // 40 * 64 s = 2560 s > 2400 s
        assert!(ScanPlan::new(steps, 0.0, DEFAULT_ACQUISITION_BUDGET).is_err());
    }

    #[test]
    fn timestamps_accumulate_dwell() {
        let plan = ScanPlan::new(vec![step(0.0), step(1.0), step(2.0)], 100.0, 2400.0).unwrap();
        assert_eq!(plan.timestamp(0), 164.0);
        assert_eq!(plan.timestamp(2), 292.0);
        assert_eq!(plan.duration(), 192.0);
    }
}
