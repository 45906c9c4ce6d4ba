//! Goodness-of-fit probability.

use crate::error::{Error, Result};

/// Upper-tail probability Q(chi2 | dof) that a correct model produces a
/// chi-squared at least this large: the regularized upper incomplete gamma
/// function Q(dof/2, chi2/2).
pub fn chi2_probability(chi2: f64, dof: usize) -> Result<f64> {
    if !(chi2 >= 0.0) {
        return Err(Error::Domain(format!("chi2 must be >= 0, got {chi2}")));
    }
    if dof == 0 {
        return Err(Error::Domain("dof must be >= 1".into()));
    }
    if chi2 == 0.0 {
        return Ok(1.0);
    }
    Ok(statrs::function::gamma::gamma_ur(dof as f64 / 2.0, chi2 / 2.0))
}
