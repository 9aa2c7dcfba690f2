//! Single-nanowire detector physics.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::FWHM_PER_SIGMA;

/// Measured absorption per unit nanowire length, dB/µm.
pub const DEFAULT_ALPHA_DB_PER_UM: f64 = 0.62;
/// 1/e recovery time of the output pulse, ns.
pub const DEFAULT_RECOVERY_NS: f64 = 1.7;
/// Hard-blanking dead time, ≈ 3 recovery times, ps.
pub const DEFAULT_DEAD_TIME_PS: f64 = 5_000.0;
pub const DEFAULT_RISE_TIME_NS: f64 = 0.3;

/// One inline nanowire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NanowireSpec {
    pub length_um: f64,
    pub alpha_db_per_um: f64,
    /// Probability that an absorbed photon produces a click.
    pub eta_int: f64,
    pub dead_time_ps: f64,
    /// Detector-side timing jitter (FWHM); readout and trigger jitter are
    /// configured on the run.
    pub jitter_fwhm_ps: f64,
    pub dark_rate_hz: f64,
}

impl Default for NanowireSpec {
    /// Template NbTiN wire: 45 µm, intrinsic jitter 68.8 ps,
    /// 1.5 kHz dark counts at 85 % bias.
    fn default() -> Self {
        Self {
            length_um: 45.0,
            alpha_db_per_um: DEFAULT_ALPHA_DB_PER_UM,
            eta_int: 0.85,
            dead_time_ps: DEFAULT_DEAD_TIME_PS,
            jitter_fwhm_ps: 68.8,
            dark_rate_hz: 1_500.0,
        }
    }
}

impl NanowireSpec {
    /// Noise-free, unit-efficiency wire with no dead time.
    pub fn ideal(length_um: f64, alpha_db_per_um: f64) -> Self {
        Self {
            length_um,
            alpha_db_per_um,
            eta_int: 1.0,
            dead_time_ps: 0.0,
            jitter_fwhm_ps: 0.0,
            dark_rate_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.length_um >= 0.0
            && self.alpha_db_per_um > 0.0
            && (0.0..=1.0).contains(&self.eta_int)
            && self.dead_time_ps >= 0.0
            && self.jitter_fwhm_ps >= 0.0
            && self.dark_rate_hz >= 0.0;
        if ok {
            Ok(())
        } else {
            domain(format!("invalid nanowire spec {self:?}"))
        }
    }

    pub fn absorption(&self) -> f64 {
        absorption_fraction(self.length_um, self.alpha_db_per_um).unwrap_or(0.0)
    }
}

/// Phenomenological bias dependence: sigmoid efficiency and exponential dark rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasCurve {
    pub eta_max: f64,
    /// Sigmoid midpoint, fraction of the critical current.
    pub bias_mid: f64,
    pub bias_width: f64,
    pub dcr0_hz: f64,
    pub dcr_gamma: f64,
}

impl Default for BiasCurve {
    fn default() -> Self {
        let gamma = 25.0;
        Self {
            eta_max: 0.9,
            bias_mid: 0.9,
            bias_width: 0.03,
            dcr0_hz: 1_500.0 * (-gamma * 0.85f64).exp(),
            dcr_gamma: gamma,
        }
    }
}

impl BiasCurve {
    /// Choose `dcr0` so that `dark_rate(bias) = rate_hz`.
    pub fn with_dark_rate_at(mut self, bias: f64, rate_hz: f64) -> Self {
        self.dcr0_hz = rate_hz * (-self.dcr_gamma * bias).exp();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta_max) || !(self.bias_width > 0.0) || !(self.dcr0_hz >= 0.0) {
            return domain(format!("invalid bias curve {self:?}"));
        }
        Ok(())
    }
}

/// Timing-jitter components, all FWHM in ps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterBudget {
    pub fwhm_system: f64,
    pub fwhm_electr: f64,
    pub fwhm_setup: f64,
    pub fwhm_intr: f64,
}

impl Default for JitterBudget {
    fn default() -> Self {
        Self::decompose(75.0, 29.5, 4.5).expect("default jitter budget is consistent")
    }
}

impl JitterBudget {
    /// Split a measured system jitter into its intrinsic part.
    pub fn decompose(fwhm_system: f64, fwhm_electr: f64, fwhm_setup: f64) -> Result<Self> {
        let fwhm_intr = intrinsic_jitter(fwhm_system, fwhm_electr, fwhm_setup)?;
        Ok(Self { fwhm_system, fwhm_electr, fwhm_setup, fwhm_intr })
    }

    /// Quadrature sum of the three components.
    pub fn recomposed(&self) -> f64 {
        (self.fwhm_electr.powi(2) + self.fwhm_setup.powi(2) + self.fwhm_intr.powi(2)).sqrt()
    }
}

/// Inputs of an on-chip detection efficiency measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyMeasurement {
    /// Count rate under illumination.
    pub lcr_hz: f64,
    pub dcr_hz: f64,
    /// Coupler and propagation transmission.
    pub eta_c: f64,
    /// Photon flux delivered to the chip, photons/s.
    pub flux: f64,
}

/// Fraction of the guided power absorbed by a wire of `length_um`.
pub fn absorption_fraction(length_um: f64, alpha_db_per_um: f64) -> Result<f64> {
    if !(length_um >= 0.0) {
        return domain(format!("nanowire length must be non-negative, got {length_um}"));
    }
    if !(alpha_db_per_um > 0.0) {
        return domain(format!("absorption coefficient must be positive, got {alpha_db_per_um}"));
    }
    // 1 − 10^(−αl/10), written to keep precision for short wires.
    Ok(-(-alpha_db_per_um * length_um / 10.0 * std::f64::consts::LN_10).exp_m1())
}

/// Wire length absorbing `target` of the incoming light.
pub fn length_for_absorption(target: f64, alpha_db_per_um: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&target) {
        return domain(format!(
            "absorption target must lie in [0, 1), got {target} (unit absorption needs an infinite wire)"
        ));
    }
    if !(alpha_db_per_um > 0.0) {
        return domain(format!("absorption coefficient must be positive, got {alpha_db_per_um}"));
    }
    Ok(-10.0 * (-target).ln_1p() / std::f64::consts::LN_10 / alpha_db_per_um)
}

fn check_bias(bias: f64) -> Result<()> {
    if (0.0..=1.0).contains(&bias) {
        Ok(())
    } else {
        domain(format!("bias must be a fraction of the critical current in [0, 1], got {bias}"))
    }
}

pub fn internal_efficiency(bias: f64, curve: &BiasCurve) -> Result<f64> {
    check_bias(bias)?;
    curve.validate()?;
    Ok(curve.eta_max / (1.0 + (-(bias - curve.bias_mid) / curve.bias_width).exp()))
}

pub fn dark_rate(bias: f64, curve: &BiasCurve) -> Result<f64> {
    check_bias(bias)?;
    curve.validate()?;
    Ok(curve.dcr0_hz * (curve.dcr_gamma * bias).exp())
}

/// Averaged output pulse: linear rise over `rise_time_ns` ending at `t = 0`,
/// then exponential recovery with time constant `tau_r_ns`.
pub fn pulse_waveform(t_ns: f64, v_peak: f64, tau_r_ns: f64, rise_time_ns: f64) -> f64 {
    if t_ns >= 0.0 {
        v_peak * (-t_ns / tau_r_ns).exp()
    } else if rise_time_ns > 0.0 && t_ns >= -rise_time_ns {
        v_peak * (t_ns + rise_time_ns) / rise_time_ns
    } else {
        0.0
    }
}

/// Noise-induced jitter `2√(2 ln 2)·σ_noise/SR`, in ps FWHM, for a slew rate
/// given per ns.
pub fn electronic_jitter(sigma_noise: f64, slew_rate_per_ns: f64) -> Result<f64> {
    if !(slew_rate_per_ns > 0.0) {
        return domain(format!("slew rate must be positive, got {slew_rate_per_ns}"));
    }
    Ok(FWHM_PER_SIGMA * sigma_noise / slew_rate_per_ns * 1e3)
}

/// `√(system² − electr² − setup²)`.
pub fn intrinsic_jitter(fwhm_system: f64, fwhm_electr: f64, fwhm_setup: f64) -> Result<f64> {
    let rest = fwhm_system * fwhm_system - fwhm_electr * fwhm_electr - fwhm_setup * fwhm_setup;
    if fwhm_system < 0.0 || fwhm_electr < 0.0 || fwhm_setup < 0.0 || rest < 0.0 {
        return Err(Error::Domain(format!(
            "inconsistent jitter budget: system {fwhm_system} ps cannot contain electronic \
             {fwhm_electr} ps and setup {fwhm_setup} ps"
        )));
    }
    Ok(rest.sqrt())
}

/// On-chip detection efficiency `(LCR − DCR)/(η_c·Φ)`.
pub fn ocde(m: &EfficiencyMeasurement) -> Result<f64> {
    if !(m.lcr_hz >= m.dcr_hz && m.dcr_hz >= 0.0) || !(m.eta_c > 0.0 && m.eta_c <= 1.0) || !(m.flux > 0.0) {
        return domain(format!("invalid efficiency measurement {m:?}"));
    }
    Ok((m.lcr_hz - m.dcr_hz) / (m.eta_c * m.flux))
}
