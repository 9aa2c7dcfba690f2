//! TM-mode leakage in the etchless BIC waveguide.
//!
//! The guided TM mode couples to phase-matched TE slab modes; its power
//! decays over the length
//!
//! ```text
//! L(w) = (4·L0/kx²)·sinc(kx·w/2)⁻²
//! ```
//!
//! which diverges at the bound-state widths `w = 2πm/kx`. A waveguide of
//! length `l` between two grating couplers then transmits
//!
//! ```text
//! T_dB(w) = 2·C_gc − (5·l·kx²·log10(e)/(2·L0))·sinc²(kx·w/2)
//! ```
//!
//! `L(w)` is the power 1/e length, the only reading under which the two
//! expressions agree: `T_dB − 2·C_gc = −10·log10(e)·l/L(w)`.

use std::f64::consts::{LOG10_E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fitkit::{self, FitModel, ModelKind};

/// |sinc| below this counts as an exact zero of the leakage.
const SINC_ZERO_TOL: f64 = 1e-12;
const UM_PER_CM: f64 = 1e4;

/// Width of the chosen bound state, µm.
pub const DEFAULT_BIC_WIDTH_UM: f64 = 1.57;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicModelParams {
    /// Transverse wavevector of the phase-matched modes, rad/µm.
    pub kx: f64,
    /// Coupling-strength length, µm.
    pub l0: f64,
    /// Single grating-coupler efficiency, dB (≤ 0).
    pub c_gc: f64,
    /// Index m of the bound state `w = 2πm/kx` being used.
    pub mode_order: u32,
}

impl Default for BicModelParams {
    /// m = 2 bound state at 1.57 µm, with L0 calibrated so that a +5 % width
    /// error costs 3 dB/cm.
    fn default() -> Self {
        Self {
            kx: 2.0 * PI * 2.0 / DEFAULT_BIC_WIDTH_UM,
            l0: 509.0,
            c_gc: -5.0,
            mode_order: 2,
        }
    }
}

impl BicModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kx > 0.0 && self.kx.is_finite()) {
            return domain(format!("kx must be positive, got {}", self.kx));
        }
        if !(self.l0 > 0.0 && self.l0.is_finite()) {
            return domain(format!("L0 must be positive, got {}", self.l0));
        }
        if self.mode_order < 1 {
            return domain("mode order must be at least 1");
        }
        Ok(())
    }

    /// Width of the bound state of order `mode_order`.
    pub fn bic_width(&self) -> f64 {
        2.0 * PI * f64::from(self.mode_order) / self.kx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideGeometry {
    pub width_um: f64,
    pub length_um: f64,
}

/// One measured point: `x` is a width or a length in µm depending on the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionSample {
    pub x_um: f64,
    pub transmission_db: f64,
}

/// `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Power decay length `L(w)` in µm; `f64::INFINITY` at a bound state.
pub fn decay_length(width_um: f64, params: &BicModelParams) -> Result<f64> {
    if !(width_um > 0.0) {
        return domain(format!("waveguide width must be positive, got {width_um}"));
    }
    params.validate()?;
    let s = sinc(params.kx * width_um / 2.0);
    if s.abs() < SINC_ZERO_TOL {
        return Ok(f64::INFINITY);
    }
    Ok(4.0 * params.l0 / (params.kx * params.kx) / (s * s))
}

/// Leakage loss in dB/cm plus a width-independent residual term.
pub fn propagation_loss(width_um: f64, params: &BicModelParams, residual_db_per_cm: f64) -> Result<f64> {
    if !(residual_db_per_cm >= 0.0) {
        return domain(format!("residual loss must be non-negative, got {residual_db_per_cm}"));
    }
    let l = decay_length(width_um, params)?;
    let leak = if l.is_infinite() { 0.0 } else { 10.0 * LOG10_E * UM_PER_CM / l };
    Ok(leak + residual_db_per_cm)
}

pub(crate) fn transmission_formula(width_um: f64, length_um: f64, kx: f64, l0: f64, c_gc: f64) -> f64 {
    let s = sinc(kx * width_um / 2.0);
    2.0 * c_gc - 5.0 * length_um * kx * kx * LOG10_E / (2.0 * l0) * s * s
}

/// Fibre-to-fibre transmission through a straight waveguide, dB.
pub fn transmission_db(geom: &WaveguideGeometry, params: &BicModelParams) -> Result<f64> {
    if !(geom.width_um > 0.0) || !(geom.length_um >= 0.0) {
        return domain(format!("invalid waveguide geometry {geom:?}"));
    }
    params.validate()?;
    Ok(transmission_formula(geom.width_um, geom.length_um, params.kx, params.l0, params.c_gc))
}

/// All bound-state widths `2πm/kx` (m ≥ 1) inside `[w_min, w_max]`, ascending.
pub fn bic_widths(params: &BicModelParams, w_min: f64, w_max: f64) -> Result<Vec<f64>> {
    if !(w_min > 0.0) || !(w_max >= w_min) {
        return domain(format!("invalid width range [{w_min}, {w_max}]"));
    }
    params.validate()?;
    let period = 2.0 * PI / params.kx;
    let first = (w_min / period).ceil().max(1.0) as u64;
    let mut out = Vec::new();
    let mut m = first;
    loop {
        let w = period * m as f64;
        if w > w_max {
            break;
        }
        if w >= w_min {
            out.push(w);
        }
        m += 1;
    }
    Ok(out)
}

/// Solve `propagation_loss(width_um) = loss_db_per_cm` for L0, keeping kx fixed.
///
/// Loss is inversely proportional to L0, so the solution is closed-form.
pub fn calibrate_l0(kx: f64, width_um: f64, loss_db_per_cm: f64) -> Result<f64> {
    if !(kx > 0.0) || !(width_um > 0.0) || !(loss_db_per_cm > 0.0) {
        return domain("calibration needs positive kx, width and loss");
    }
    let s = sinc(kx * width_um / 2.0);
    if s.abs() < SINC_ZERO_TOL {
        return domain("no finite L0 gives non-zero loss at a bound-state width");
    }
    Ok(10.0 * LOG10_E * UM_PER_CM * kx * kx * s * s / (4.0 * loss_db_per_cm))
}

#[derive(Debug, Clone)]
pub struct BicFit {
    pub params: BicModelParams,
    /// Width of bound state `init.mode_order` under the fitted `kx`, µm.
    pub w_bic: f64,
    pub residual_rms_db: f64,
    pub fit: fitkit::FitResult,
}

/// Fit the width sweep `samples` (x = width) of waveguides `length_um` long.
/// The bound state of interest is `init.mode_order`; a sweep may also cross
/// its neighbours, which transmit just as well.
pub fn fit_bic_model(samples: &[TransmissionSample], length_um: f64, init: &BicModelParams) -> Result<BicFit> {
    init.validate()?;
    if samples.len() < 5 {
        return Err(Error::Precondition(format!(
            "BIC fit needs at least 5 samples, got {}",
            samples.len()
        )));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.x_um).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.transmission_db).collect();
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half_period = PI / init.kx;
    if hi - lo < half_period {
        return Err(Error::Precondition(format!(
            "widths span {:.4} µm, less than half a sinc period ({half_period:.4} µm)",
            hi - lo
        )));
    }
    if !(length_um > 0.0) {
        return domain("waveguide length must be positive");
    }

    let model = FitModel::new(ModelKind::Sinc2Transmission { length_um });
    let result = fitkit::nls_fit(&model, &x, &y, &[init.kx, init.l0, init.c_gc])?;
    if !result.converged {
        return Err(Error::FitFailure {
            reason: "BIC transmission fit did not converge".into(),
            iterations: result.iterations,
            last_parameters: result.parameters,
        });
    }
    let (kx, l0, c_gc) = (result.parameters[0], result.parameters[1], result.parameters[2]);

    let params = BicModelParams { kx, l0, c_gc, mode_order: init.mode_order };
    Ok(BicFit {
        params,
        w_bic: params.bic_width(),
        residual_rms_db: result.residual_rms,
        fit: result,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSlope {
    pub slope_db_per_cm: f64,
    /// Zero-length transmission; twice the coupler efficiency when all
    /// samples share the same couplers.
    pub intercept_db: f64,
}

/// Ordinary least-squares line through a length sweep (x = length in µm).
pub fn fit_loss_slope(samples: &[TransmissionSample]) -> Result<LossSlope> {
    if samples.len() < 2 {
        return Err(Error::Precondition("loss slope needs at least two samples".into()));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.x_um).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.transmission_db).collect();
    let (slope, intercept) = crate::fitkit::ols_line(&x, &y)
        .ok_or_else(|| Error::Precondition("all lengths are equal: slope is undefined".into()))?;
    Ok(LossSlope {
        slope_db_per_cm: slope * UM_PER_CM,
        intercept_db: intercept,
    })
}
