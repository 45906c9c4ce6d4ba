use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fundamental constants entering the force laws, CODATA 2018 values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Planck constant h (J s).
    pub planck_h: f64,
    /// Speed of light c (m/s).
    pub speed_of_light_c: f64,
    /// Vacuum permittivity (F/m).
    pub epsilon0: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            planck_h: 6.626_070_15e-34,
            speed_of_light_c: 299_792_458.0,
            epsilon0: 8.854_187_8128e-12,
        }
    }
}

impl PhysicalConstants {
    /// Ideal-conductor pressure coefficient pi*h*c/480 (N m^2).
    ///
    /// The vacuum pressure between parallel conducting plates at gap d is
    /// kc_theory()/d^4.
    pub fn kc_theory(&self) -> f64 {
        std::f64::consts::PI * self.planck_h * self.speed_of_light_c / 480.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.planck_h > 0.0 && self.speed_of_light_c > 0.0 && self.epsilon0 > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(
                "physical constants must be strictly positive".into(),
            ))
        }
    }
}
