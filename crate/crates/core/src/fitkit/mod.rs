//! Nonlinear least squares and the model library used by every fit in the
//! toolkit.
//!
//! [`nls_fit`] drives a Levenberg-Marquardt iteration over a [`FitModel`];
//! [`least_squares`] exposes the same engine for arbitrary closures.

mod lm;
mod models;

pub use lm::{least_squares, LmOptions};
pub use models::{exgaussian, gaussian, FitModel, ModelKind};
pub(crate) use models::ols_line;

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::FWHM_PER_SIGMA;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub parameters: Vec<f64>,
    /// `s²·(JᵀJ)⁻¹` with `s² = SSR/(m − n)`; `None` when singular or with no
    /// residual degrees of freedom.
    pub covariance: Option<DMatrix<f64>>,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Sum of squared residuals after the initial point and every accepted step.
    pub ssr_history: Vec<f64>,
}

impl FitResult {
    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        self.covariance
            .as_ref()
            .map(|c| (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect())
    }
}

/// Fit `model` to the samples `(x[i], y[i])` starting from `init`.
///
/// Non-convergence is reported through `converged = false`, never as an error;
/// errors are reserved for malformed input.
pub fn nls_fit(model: &FitModel, x: &[f64], y: &[f64], init: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::Precondition(format!(
            "x and y lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if init.len() != model.arity() {
        return Err(Error::Precondition(format!(
            "model {} takes {} parameters, got {}",
            model.kind.name(),
            model.arity(),
            init.len()
        )));
    }
    if x.len() < model.arity() {
        return Err(Error::Precondition(format!(
            "{} samples cannot determine {} parameters",
            x.len(),
            model.arity()
        )));
    }
    if x.iter().chain(y).chain(init).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite sample or initial value".into()));
    }
    let f = |xi: f64, p: &[f64]| model.eval(xi, p);
    Ok(least_squares(f, x, y, init, &model.bounds, &LmOptions::default()))
}

/// Full width at half maximum of a peak model, in the units of x.
pub fn fwhm_of(model: &FitModel, parameters: &[f64]) -> Result<f64> {
    if parameters.len() != model.arity() {
        return Err(Error::Precondition("parameter count does not match model".into()));
    }
    match model.kind {
        ModelKind::Gaussian => Ok(FWHM_PER_SIGMA * parameters[2].abs()),
        ModelKind::ExGaussian => {
            let (mu, sigma, tau) = (parameters[1], parameters[2].abs(), parameters[3].abs());
            Ok(exgaussian_fwhm(mu, sigma, tau))
        }
        _ => domain(format!("FWHM is undefined for model {}", model.kind.name())),
    }
}

/// Numeric FWHM of a unit-area exponentially modified Gaussian.
fn exgaussian_fwhm(mu: f64, sigma: f64, tau: f64) -> f64 {
    let f = |x: f64| exgaussian(x, &[1.0, mu, sigma, tau, 0.0]);
    let scale = sigma + tau;

    // The density is unimodal; golden-section search for the mode.
    let (mut a, mut b) = (mu - 3.0 * sigma, mu + 3.0 * sigma + 3.0 * tau);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-9 * scale {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mode = 0.5 * (a + b);
    let half = 0.5 * f(mode);

    let crossing = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            if (outside - inside).abs() <= 1e-7 * scale {
                break;
            }
            let mid = 0.5 * (inside + outside);
            if f(mid) >= half {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };
    let left = crossing(mode, mode - 10.0 * sigma - tau);
    let right = crossing(mode, mode + 10.0 * sigma + 50.0 * tau);
    right - left
}
