use std::f64::consts::{PI, SQRT_2};
use std::str::FromStr;

use statrs::function::erf::erfc;

use crate::bicwave;
use crate::error::Error;
use crate::FWHM_PER_SIGMA;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `(kx, L0, c_gc)`: BIC waveguide transmission in dB versus width for a
    /// fixed waveguide length.
    Sinc2Transmission { length_um: f64 },
    /// `(slope, intercept)`.
    Line,
    /// `(amplitude, tau, offset)`: `A·exp(−x/τ) + c`.
    ExpDecay,
    /// `(amplitude, mu, sigma, offset)`: peak height `A` above `c`.
    Gaussian,
    /// `(amplitude, mu, sigma, tau, offset)`: `A` is the area of the
    /// exponentially modified Gaussian, tail toward positive x.
    ExGaussian,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Sinc2Transmission { .. } => "sinc2_transmission",
            ModelKind::Line => "line",
            ModelKind::ExpDecay => "exp_decay",
            ModelKind::Gaussian => "gaussian",
            ModelKind::ExGaussian => "exgaussian",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    /// Parses the model ids used on the command line. The transmission model
    /// defaults to the 1 mm waveguides of the width sweep.
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sinc2_transmission" => Ok(ModelKind::Sinc2Transmission { length_um: 1000.0 }),
            "line" => Ok(ModelKind::Line),
            "exp_decay" => Ok(ModelKind::ExpDecay),
            "gaussian" => Ok(ModelKind::Gaussian),
            "exgaussian" => Ok(ModelKind::ExGaussian),
            other => Err(Error::Domain(format!("unknown model '{other}'"))),
        }
    }
}

/// A model id with named, bounded parameters.
#[derive(Debug, Clone)]
pub struct FitModel {
    pub kind: ModelKind,
    pub names: Vec<&'static str>,
    pub bounds: Vec<(f64, f64)>,
}

const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);
const POSITIVE: (f64, f64) = (1e-12, f64::INFINITY);

impl FitModel {
    pub fn new(kind: ModelKind) -> Self {
        let (names, bounds) = match kind {
            ModelKind::Sinc2Transmission { .. } => {
                (vec!["kx", "l0", "c_gc"], vec![POSITIVE, POSITIVE, FREE])
            }
            ModelKind::Line => (vec!["slope", "intercept"], vec![FREE, FREE]),
            ModelKind::ExpDecay => (vec!["amplitude", "tau", "offset"], vec![FREE, POSITIVE, FREE]),
            ModelKind::Gaussian => (
                vec!["amplitude", "mu", "sigma", "offset"],
                vec![FREE, FREE, POSITIVE, FREE],
            ),
            ModelKind::ExGaussian => (
                vec!["amplitude", "mu", "sigma", "tau", "offset"],
                vec![FREE, FREE, POSITIVE, POSITIVE, FREE],
            ),
        };
        Self { kind, names, bounds }
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }

    pub fn eval(&self, x: f64, p: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Sinc2Transmission { length_um } => {
                bicwave::transmission_formula(x, length_um, p[0], p[1], p[2])
            }
            ModelKind::Line => p[0] * x + p[1],
            ModelKind::ExpDecay => p[0] * (-x / p[1]).exp() + p[2],
            ModelKind::Gaussian => gaussian(x, p),
            ModelKind::ExGaussian => exgaussian(x, p),
        }
    }

    /// Data-driven starting point for the iteration.
    pub fn initial_guess(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return vec![1.0; self.arity()];
        }
        let (imax, ymax) = argmax(y);
        let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
        let xmin = x.iter().copied().fold(f64::INFINITY, f64::min);
        let xmax = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (xmax - xmin).max(f64::MIN_POSITIVE);
        match self.kind {
            ModelKind::Sinc2Transmission { .. } => {
                let d = bicwave::BicModelParams::default();
                vec![d.kx, d.l0, 0.5 * ymax]
            }
            ModelKind::Line => {
                let (slope, intercept) = ols_line(x, y).unwrap_or((0.0, y[0]));
                vec![slope, intercept]
            }
            ModelKind::ExpDecay => {
                let amp = ymax - ymin;
                let target = ymin + amp / std::f64::consts::E;
                let x0 = x[imax];
                let tau = x
                    .iter()
                    .zip(y)
                    .filter(|(&xi, &yi)| xi > x0 && yi <= target)
                    .map(|(&xi, _)| xi - x0)
                    .fold(f64::INFINITY, f64::min);
                let tau = if tau.is_finite() && tau > 0.0 { tau } else { span / 3.0 };
                vec![amp * (x0 / tau).exp(), tau, ymin]
            }
            ModelKind::Gaussian | ModelKind::ExGaussian => {
                let amp = ymax - ymin;
                let half = ymin + 0.5 * amp;
                let above: Vec<f64> = x
                    .iter()
                    .zip(y)
                    .filter(|(_, &yi)| yi >= half)
                    .map(|(&xi, _)| xi)
                    .collect();
                let width = above.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    - above.iter().copied().fold(f64::INFINITY, f64::min);
                let sigma = (width / FWHM_PER_SIGMA).max(span / (10.0 * x.len() as f64));
                if self.kind == ModelKind::Gaussian {
                    vec![amp, x[imax], sigma, ymin]
                } else {
                    let area = amp * sigma * (2.0 * PI).sqrt();
                    vec![area, x[imax] - 0.3 * sigma, 0.8 * sigma, 0.5 * sigma, ymin]
                }
            }
        }
    }
}

fn argmax(y: &[f64]) -> (usize, f64) {
    y.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
}

pub(crate) fn ols_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// `A·exp(−(x − μ)²/(2σ²)) + c` for `p = (A, μ, σ, c)`.
pub fn gaussian(x: f64, p: &[f64]) -> f64 {
    let u = (x - p[1]) / p[2];
    p[0] * (-0.5 * u * u).exp() + p[3]
}

/// Exponentially modified Gaussian with area `A`, for `p = (A, μ, σ, τ, c)`:
/// a normal density convolved with `exp(−t/τ)/τ`, `t ≥ 0`.
///
/// Evaluated as `A/(2τ)·exp(−u²/2)·erfcx(z)` with `u = (x − μ)/σ` and
/// `z = (σ/τ − u)/√2`, which stays finite in the Gaussian limit `τ → 0`.
pub fn exgaussian(x: f64, p: &[f64]) -> f64 {
    let (area, mu, sigma, tau, offset) = (p[0], p[1], p[2], p[3], p[4]);
    let u = (x - mu) / sigma;
    if tau <= 1e-12 * sigma {
        return area / (sigma * (2.0 * PI).sqrt()) * (-0.5 * u * u).exp() + offset;
    }
    let z = (sigma / tau - u) / SQRT_2;
    let value = if z < 20.0 {
        area / (2.0 * tau) * (z * z - 0.5 * u * u).exp() * erfc(z)
    } else {
        // erfcx(z) ≈ 1/(z√π)·(1 − 1/(2z²) + 3/(4z⁴))
        let z2 = z * z;
        let erfcx = (1.0 - 0.5 / z2 + 0.75 / (z2 * z2)) / (z * PI.sqrt());
        area / (2.0 * tau) * (-0.5 * u * u).exp() * erfcx
    };
    value + offset
}
