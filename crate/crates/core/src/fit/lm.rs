//! Weighted nonlinear least squares by damped Gauss-Newton with a
//! Levenberg-Marquardt damping schedule.
//!
//! The solver works on whitened residuals r_i = (y_i - model_i)/sigma_i and
//! minimizes chi^2 = sum r_i^2. The normal matrix is equilibrated to unit
//! diagonal before the damped solve, which makes the damping parameter
//! dimensionless and keeps problems with parameter scales spanning thirty
//! orders of magnitude (C_Cas ~ 1e-28, V_0 ~ 1e-2) well conditioned.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::chi2::chi2_probability;
use crate::error::{Error, Result};

/// A weighted least-squares problem: residuals and (optionally) analytic
/// Jacobian rows.
pub trait LeastSquaresModel {
    fn residual_count(&self) -> usize;
    fn param_count(&self) -> usize;

    /// Whitened residual r_i(p) = (data_i - model_i(p)) / sigma_i.
    fn residual(&self, params: &[f64], i: usize) -> f64;

    /// Fill `out` with d r_i / d p_j. Return false to fall back to central
    /// finite differences on `residual`.
    fn jacobian_row(&self, _params: &[f64], _i: usize, _out: &mut [f64]) -> bool {
        false
    }

    /// Characteristic magnitudes used for finite-difference steps on
    /// parameters that are exactly zero.
    fn param_scales(&self) -> Vec<f64> {
        vec![1.0; self.param_count()]
    }
}

/// Solver knobs. The defaults are the contract: damping starts at 1e-3,
/// shrinks by 0.3 on an accepted step and doubles on a rejected one;
/// convergence is a relative chi^2 change below 1e-10 or a scaled step
/// norm below 1e-12; at most 200 iterations.
#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_decrease: f64,
    pub damping_increase: f64,
    pub chi2_relative_tolerance: f64,
    pub step_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            initial_damping: 1e-3,
            damping_decrease: 0.3,
            damping_increase: 2.0,
            chi2_relative_tolerance: 1e-10,
            step_tolerance: 1e-12,
        }
    }
}

/// Outcome of a weighted least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Covariance of the parameters: inverse of the Gauss-Newton normal
    /// matrix J^T J at the optimum (pseudo-inverse if rank deficient).
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_probability: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }

    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        let den = (self.covariance[i][i] * self.covariance[j][j]).sqrt();
        if den > 0.0 {
            self.covariance[i][j] / den
        } else {
            0.0
        }
    }
}

fn residual_vector<M: LeastSquaresModel>(model: &M, p: &[f64]) -> Option<DVector<f64>> {
    let m = model.residual_count();
    let mut r = DVector::zeros(m);
    for i in 0..m {
        let v = model.residual(p, i);
        if !v.is_finite() {
            return None;
        }
        r[i] = v;
    }
    Some(r)
}

fn jacobian<M: LeastSquaresModel>(model: &M, p: &[f64]) -> Result<DMatrix<f64>> {
    let m = model.residual_count();
    let n = model.param_count();
    let scales = model.param_scales();
    let mut jac = DMatrix::zeros(m, n);
    let mut row = vec![0.0; n];
    let mut p_work = p.to_vec();
    for i in 0..m {
        if model.jacobian_row(p, i, &mut row) {
            for j in 0..n {
                jac[(i, j)] = row[j];
            }
        } else {
            // Central finite differences.
            for j in 0..n {
                let scale = if p[j] != 0.0 { p[j].abs() } else { scales[j].abs().max(f64::MIN_POSITIVE) };
                let h = 1e-6 * scale;
                p_work[j] = p[j] + h;
                let fp = model.residual(&p_work, i);
                p_work[j] = p[j] - h;
                let fm = model.residual(&p_work, i);
                p_work[j] = p[j];
                let d = (fp - fm) / (2.0 * h);
                if !d.is_finite() {
                    return Err(Error::Degenerate(format!(
                        "non-finite finite-difference derivative at row {i}, parameter {j}"
                    )));
                }
                jac[(i, j)] = d;
            }
        }
    }
    Ok(jac)
}

/// Covariance as the (pseudo-)inverse of the normal matrix.
fn covariance_from_normal(a: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(chol) = a.clone().cholesky() {
        return chol.inverse();
    }
    // Rank-deficient optimum (e.g. a parameter entering quadratically at
    // its own vertex): fall back to the Moore-Penrose pseudo-inverse.
    let svd = a.clone().svd(true, true);
    let eps = a.nrows() as f64 * f64::EPSILON * svd.singular_values.max();
    svd.pseudo_inverse(eps)
        .unwrap_or_else(|_| DMatrix::zeros(a.nrows(), a.ncols()))
}

/// Run the fit and also return the accepted chi^2 trace (first entry is
/// the chi^2 of the initial guess).
pub fn lm_fit_traced<M: LeastSquaresModel>(
    model: &M,
    initial: &[f64],
    options: &LmOptions,
) -> Result<(FitResult, Vec<f64>)> {
    let m = model.residual_count();
    let n = model.param_count();
    if initial.len() != n {
        return Err(Error::Config(format!(
            "initial guess has {} parameters, model wants {n}",
            initial.len()
        )));
    }
    if m <= n {
        return Err(Error::Identifiability(format!(
            "{m} residuals cannot determine {n} parameters with dof >= 1"
        )));
    }
    let dof = m - n;

    let mut p = DVector::from_column_slice(initial);
    let mut r = residual_vector(model, p.as_slice()).ok_or_else(|| {
        Error::Domain("initial parameters give non-finite residuals".into())
    })?;
    let mut chi2 = r.norm_squared();
    let mut trace = vec![chi2];
    let mut lambda = options.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations && !converged {
        iterations += 1;
        let jac = jacobian(model, p.as_slice())?;
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;

        // Equilibrate to unit diagonal.
        let mut scale = DVector::zeros(n);
        for j in 0..n {
            let d = a[(j, j)];
            scale[j] = if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 };
        }
        let mut a_s = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a_s[(i, j)] = a[(i, j)] * scale[i] * scale[j];
            }
        }
        let mut g_s = DVector::zeros(n);
        for j in 0..n {
            g_s[j] = g[j] * scale[j];
        }

        let mut accepted = false;
        loop {
            let mut damped = a_s.clone();
            for j in 0..n {
                damped[(j, j)] += lambda;
            }
            let step_s = match damped.cholesky() {
                Some(chol) => chol.solve(&(-&g_s)),
                None => {
                    lambda *= options.damping_increase;
                    if lambda > 1e300 {
                        return Err(Error::Degenerate(
                            "normal matrix singular at maximal damping".into(),
                        ));
                    }
                    continue;
                }
            };
            let mut p_try = p.clone();
            for j in 0..n {
                p_try[j] += step_s[j] * scale[j];
            }
            let step_norm = step_s.norm();
            match residual_vector(model, p_try.as_slice()) {
                Some(r_try) => {
                    let chi2_try = r_try.norm_squared();
                    if chi2_try <= chi2 {
                        let drop = chi2 - chi2_try;
                        p = p_try;
                        r = r_try;
                        chi2 = chi2_try;
                        trace.push(chi2);
                        lambda = (lambda * options.damping_decrease).max(1e-15);
                        accepted = true;
                        if drop <= options.chi2_relative_tolerance * chi2.max(f64::MIN_POSITIVE)
                            || step_norm <= options.step_tolerance
                        {
                            converged = true;
                        }
                        break;
                    }
                }
                None => {} // step left the model domain, treat as rejection
            }
            lambda *= options.damping_increase;
            if lambda > 1e300 {
                // No downhill step exists at machine precision.
                converged = true;
                break;
            }
        }
        if !accepted && converged {
            break;
        }
    }

    let jac = jacobian(model, p.as_slice())?;
    let a = jac.transpose() * &jac;
    let cov = covariance_from_normal(&a);
    let covariance = (0..n)
        .map(|i| (0..n).map(|j| cov[(i, j)]).collect())
        .collect();

    let result = FitResult {
        params: p.as_slice().to_vec(),
        covariance,
        chi2,
        dof,
        chi2_probability: chi2_probability(chi2, dof)?,
        converged,
        iterations,
    };
    Ok((result, trace))
}

/// Weighted Levenberg-Marquardt fit. Non-convergence at the iteration cap
/// is flagged on the result, not an error.
pub fn lm_fit<M: LeastSquaresModel>(
    model: &M,
    initial: &[f64],
    options: &LmOptions,
) -> Result<FitResult> {
    lm_fit_traced(model, initial, options).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y = a*x through the origin, unit weights.
    struct Linear {
        x: Vec<f64>,
        y: Vec<f64>,
    }

    impl LeastSquaresModel for Linear {
        fn residual_count(&self) -> usize {
            self.x.len()
        }
        fn param_count(&self) -> usize {
            1
        }
        fn residual(&self, p: &[f64], i: usize) -> f64 {
            self.y[i] - p[0] * self.x[i]
        }
        fn jacobian_row(&self, _p: &[f64], i: usize, out: &mut [f64]) -> bool {
            out[0] = -self.x[i];
            true
        }
    }

    /// Quadratic deflection parabola k*(v - v0)^2 with analytic Jacobian,
    /// whitened by a per-point sigma as in real use.
    struct Parabola {
        v: Vec<f64>,
        y: Vec<f64>,
        sigma: f64,
    }

    impl LeastSquaresModel for Parabola {
        fn residual_count(&self) -> usize {
            self.v.len()
        }
        fn param_count(&self) -> usize {
            2
        }
        fn residual(&self, p: &[f64], i: usize) -> f64 {
            let u = self.v[i] - p[1];
            (self.y[i] - p[0] * u * u) / self.sigma
        }
        fn jacobian_row(&self, p: &[f64], i: usize, out: &mut [f64]) -> bool {
            let u = self.v[i] - p[1];
            out[0] = -u * u / self.sigma;
            out[1] = 2.0 * p[0] * u / self.sigma;
            true
        }
    }

    /// Power law with offset, y = b/x^n + c, finite-difference Jacobian.
    struct PowerLaw {
        x: Vec<f64>,
        y: Vec<f64>,
        sigma: f64,
    }

    impl LeastSquaresModel for PowerLaw {
        fn residual_count(&self) -> usize {
            self.x.len()
        }
        fn param_count(&self) -> usize {
            3
        }
        fn residual(&self, p: &[f64], i: usize) -> f64 {
            (self.y[i] - (p[0] / self.x[i].powf(p[1]) + p[2])) / self.sigma
        }
    }

    #[test]
    fn linear_model_exact_recovery() {
        let x: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.25 * v).collect();
        let fit = lm_fit(&Linear { x, y }, &[1.0], &LmOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.params[0] - 3.25).abs() < 1e-12);
        assert!(fit.chi2 < 1e-20);
        assert_eq!(fit.chi2_probability, 1.0);
    }

    #[test]
    fn parabola_exact_recovery_from_far_guess() {
        let v: Vec<f64> = (-5..=5).map(|i| i as f64 * 0.05).collect();
        let k = 6.93e-7;
        let v0 = -0.0686;
        let y: Vec<f64> = v.iter().map(|&vi| k * (vi - v0) * (vi - v0)).collect();
        let fit = lm_fit(
            &Parabola { v, y, sigma: 1e-10 },
            &[1e-7, 0.0],
            &LmOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!((fit.params[0] - k).abs() / k < 1e-10);
        assert!((fit.params[1] - v0).abs() / v0.abs() < 1e-10);
    }

    #[test]
    fn chi2_never_increases_along_accepted_steps() {
        let x: Vec<f64> = (1..=20).map(|i| 0.4 + 0.13 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| 2.0 / xi.powf(3.1) + 0.5 + 0.03 * ((i * 7919 % 13) as f64 - 6.0))
            .collect();
        let model = PowerLaw { x, y, sigma: 0.03 };
        let (_, trace) = lm_fit_traced(&model, &[1.0, 2.0, 0.0], &LmOptions::default()).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "chi2 increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn three_parameter_power_law_matches_grid_search_oracle() {
        // Deterministic "noisy" 20-point set.
        let x: Vec<f64> = (1..=20).map(|i| 0.5 + 0.1 * i as f64).collect();
        let truth = (1.8, 2.7, 0.35);
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                truth.0 / xi.powf(truth.1) + truth.2 + 0.02 * (((i * 2654435761) % 17) as f64 / 8.0 - 1.0)
            })
            .collect();
        let model = PowerLaw {
            x: x.clone(),
            y: y.clone(),
            sigma: 0.02,
        };

        // Dense grid-search oracle over a box around the truth.
        let chi2_of = |b: f64, n: f64, c: f64| -> f64 {
            x.iter()
                .zip(&y)
                .map(|(&xi, &yi)| {
                    let r = (yi - (b / xi.powf(n) + c)) / 0.02;
                    r * r
                })
                .sum()
        };
        let steps = 60;
        let (b_lo, b_hi) = (1.4, 2.2);
        let (n_lo, n_hi) = (2.2, 3.2);
        let (c_lo, c_hi) = (0.1, 0.6);
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        for ib in 0..=steps {
            let b = b_lo + (b_hi - b_lo) * ib as f64 / steps as f64;
            for in_ in 0..=steps {
                let n = n_lo + (n_hi - n_lo) * in_ as f64 / steps as f64;
                for ic in 0..=steps {
                    let c = c_lo + (c_hi - c_lo) * ic as f64 / steps as f64;
                    let v = chi2_of(b, n, c);
                    if v < best.0 {
                        best = (v, b, n, c);
                    }
                }
            }
        }

        let fit = lm_fit(&model, &[1.0, 2.0, 0.0], &LmOptions::default()).unwrap();
        assert!(fit.converged);
        // The LM optimum must be at least as good as the best grid node...
        assert!(fit.chi2 <= best.0 + 1e-9);
        // ...and agree with it within the grid quantization bound: the
        // largest chi2 change across one grid cell around the best node.
        let db = (b_hi - b_lo) / steps as f64;
        let dn = (n_hi - n_lo) / steps as f64;
        let dc = (c_hi - c_lo) / steps as f64;
        let mut quantization = 0.0_f64;
        for (sb, sn, sc) in [
            (db, 0.0, 0.0),
            (-db, 0.0, 0.0),
            (0.0, dn, 0.0),
            (0.0, -dn, 0.0),
            (0.0, 0.0, dc),
            (0.0, 0.0, -dc),
        ] {
            quantization = quantization.max(chi2_of(best.1 + sb, best.2 + sn, best.3 + sc) - best.0);
        }
        assert!(
            best.0 - fit.chi2 <= quantization,
            "grid best {} vs LM {} exceeds quantization bound {}",
            best.0,
            fit.chi2,
            quantization
        );
    }

    #[test]
    fn covariance_matches_linear_theory() {
        // For y = a*x with unit sigma, var(a) = 1/sum(x^2).
        let x: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let sum_x2: f64 = x.iter().map(|v| v * v).sum();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let fit = lm_fit(&Linear { x, y }, &[1.5], &LmOptions::default()).unwrap();
        assert!((fit.covariance[0][0] - 1.0 / sum_x2).abs() / (1.0 / sum_x2) < 1e-10);
    }

    #[test]
    fn dof_precondition() {
        let model = Linear {
            x: vec![1.0],
            y: vec![2.0],
        };
        assert!(matches!(
            lm_fit(&model, &[1.0], &LmOptions::default()),
            Err(Error::Identifiability(_))
        ));
    }

    #[test]
    fn round_trip_identity_on_refit() {
        // Fit, regenerate noiseless data from the fitted model, refit:
        // parameters must come back to 1e-8 relative.
        let x: Vec<f64> = (1..=15).map(|i| 0.3 + 0.2 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| 1.2 / xi.powf(2.4) + 0.1 + 0.01 * ((i % 5) as f64 - 2.0))
            .collect();
        let first = lm_fit(
            &PowerLaw {
                x: x.clone(),
                y,
                sigma: 0.01,
            },
            &[1.0, 2.0, 0.0],
            &LmOptions::default(),
        )
        .unwrap();
        let y2: Vec<f64> = x
            .iter()
            .map(|&xi| first.params[0] / xi.powf(first.params[1]) + first.params[2])
            .collect();
        let second = lm_fit(
            &PowerLaw { x, y: y2, sigma: 0.01 },
            &first.params.clone(),
            &LmOptions::default(),
        )
        .unwrap();
        for (a, b) in first.params.iter().zip(&second.params) {
            assert!((a - b).abs() / a.abs().max(1e-12) < 1e-8);
        }
    }
}
