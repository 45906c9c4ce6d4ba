//! Estimation: the weighted least-squares engine and the fit models.

pub mod calibration;
pub mod chi2;
pub mod extraction;
pub mod lm;
pub mod lorentzian;

pub use calibration::{fit_calibration_global, CalibrationOptions, DistanceModel};
pub use chi2::chi2_probability;
pub use extraction::{
    fit_casimir, fit_free_exponent, fit_wedge_deviation, fit_with_drift, scan_point_selection,
    subtract_electrostatic, DriftFit, ExponentFit, ResidualPoint, ResidualRun, WedgeFit,
};
pub use lm::{lm_fit, lm_fit_traced, FitResult, LeastSquaresModel, LmOptions};
pub use lorentzian::{fit_lorentzian, LorentzianFit, LorentzianParams};
