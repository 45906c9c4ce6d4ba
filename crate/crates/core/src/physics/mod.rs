//! Closed-form physical laws and the parameter records they act on.

pub mod constants;
pub mod models;
pub mod types;
pub mod wedge;

pub use constants::PhysicalConstants;
pub use models::{
    casimir_pressure, deflection_coefficient, frequency_shift_model, gap_distance,
    kc_from_coefficients, kc_sigma, static_deflection,
};
pub use types::{ApparatusConfig, CalibrationParams, CasimirParams, WedgeGeometry};
pub use wedge::{tilt_capacitance, wedge_averaged_shift, wedge_factor};
