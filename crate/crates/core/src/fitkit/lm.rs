use nalgebra::{DMatrix, DVector};

use super::FitResult;

/// Stopping rules of the Levenberg-Marquardt iteration.
#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged when an accepted step lowers the SSR by less than this fraction.
    pub ssr_rtol: f64,
    /// Converged when every parameter moves by less than this fraction.
    pub step_rtol: f64,
    /// Relative central-difference step for the Jacobian.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ssr_rtol: 1e-10,
            step_rtol: 1e-12,
            fd_step: 1e-6,
        }
    }
}

const LAMBDA_MAX: f64 = 1e16;

fn clamp(p: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in p.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn ssr<F: Fn(f64, &[f64]) -> f64>(f: &F, x: &[f64], y: &[f64], p: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - f(xi, p);
            r * r
        })
        .sum()
}

fn jacobian<F: Fn(f64, &[f64]) -> f64>(
    f: &F,
    x: &[f64],
    p: &[f64],
    bounds: &[(f64, f64)],
    rel_step: f64,
) -> DMatrix<f64> {
    let n = p.len();
    let mut jac = DMatrix::zeros(x.len(), n);
    let mut probe = p.to_vec();
    for j in 0..n {
        let h = rel_step * p[j].abs().max(1e-3);
        let (lo, hi) = bounds.get(j).copied().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        // One-sided near a bound so the model is never evaluated outside it.
        let up = (p[j] + h).min(hi);
        let down = (p[j] - h).max(lo);
        let width = up - down;
        for (i, &xi) in x.iter().enumerate() {
            probe[j] = up;
            let fu = f(xi, &probe);
            probe[j] = down;
            let fd = f(xi, &probe);
            jac[(i, j)] = if width > 0.0 { (fu - fd) / width } else { 0.0 };
        }
        probe[j] = p[j];
    }
    jac
}

/// Minimise `Σ (y − f(x; p))²` over `p` by Levenberg-Marquardt with
/// Marquardt's diagonal scaling. Parameters are projected into `bounds`
/// (pass an empty slice for an unbounded problem).
///
/// Only steps that do not increase the SSR are accepted.
pub fn least_squares<F>(
    f: F,
    x: &[f64],
    y: &[f64],
    init: &[f64],
    bounds: &[(f64, f64)],
    opts: &LmOptions,
) -> FitResult
where
    F: Fn(f64, &[f64]) -> f64,
{
    let n = init.len();
    let m = x.len();
    let unbounded = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
    let bounds = if bounds.is_empty() { &unbounded[..] } else { bounds };

    let mut p = init.to_vec();
    clamp(&mut p, bounds);
    let mut cur = ssr(&f, x, y, &p);
    let mut history = vec![cur];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut singular = !cur.is_finite();
    let mut iterations = 0;

    while !converged && !singular && iterations < opts.max_iterations {
        iterations += 1;
        if cur == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian(&f, x, &p, bounds, opts.fd_step);
        let resid = DVector::from_iterator(m, x.iter().zip(y).map(|(&xi, &yi)| yi - f(xi, &p)));
        let jtj = jac.tr_mul(&jac);
        let jtr = jac.tr_mul(&resid);
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)]).collect();
        if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            // A parameter with no influence on the model: normal equations are singular.
            singular = true;
            break;
        }

        loop {
            let mut damped = jtj.clone();
            for (i, d) in diag.iter().enumerate() {
                damped[(i, i)] += lambda * d;
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&jtr),
                None => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        singular = true;
                        break;
                    }
                    continue;
                }
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut trial, bounds);
            let next = ssr(&f, x, y, &trial);
            if next.is_finite() && next <= cur {
                let rel_drop = (cur - next) / cur;
                let small_step = trial
                    .iter()
                    .zip(&p)
                    .all(|(t, o)| (t - o).abs() <= opts.step_rtol * o.abs().max(f64::MIN_POSITIVE));
                p = trial;
                cur = next;
                history.push(cur);
                lambda = (lambda / 10.0).max(1e-15);
                if rel_drop < opts.ssr_rtol || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                // No descent direction left at working precision: a stationary point.
                converged = true;
                break;
            }
        }
    }

    let residual_rms = (cur / m.max(1) as f64).sqrt();
    let covariance = if m > n && cur.is_finite() {
        let jac = jacobian(&f, x, &p, bounds, opts.fd_step);
        jac.tr_mul(&jac)
            .try_inverse()
            .map(|inv| inv * (cur / (m - n) as f64))
    } else {
        None
    };

    FitResult {
        parameters: p,
        covariance,
        residual_rms,
        converged: converged && !singular,
        iterations,
        ssr_history: history,
    }
}
