//! TOML run configuration.

use std::fmt;
use std::path::Path;

use inline_snspd::bicwave::BicModelParams;
use inline_snspd::cascade::{design_with_template, CascadeDesign, DEFAULT_LAST_CAP};
use inline_snspd::correlator::ConditionalG2Config;
use inline_snspd::nanowire::{dark_rate, internal_efficiency, BiasCurve, NanowireSpec};
use inline_snspd::simkernel::{ChannelLayout, RunConfig};
use inline_snspd::sources::SourceSpec;
use serde::{Deserialize, Serialize};

/// The documented default profile; parsing it must give `ToolkitConfig::default()`.
pub const DEFAULTS_TOML: &str = include_str!("../defaults.toml");

/// A configuration problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError {
    pub section: &'static str,
    pub message: String,
}

impl ConfigError {
    pub fn new(section: &'static str, message: impl fmt::Display) -> Self {
        Self { section, message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.section.is_empty() {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config [{}]: {}", self.section, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveguideSection {
    pub kx: f64,
    pub l0: f64,
    pub c_gc: f64,
    pub mode_order: u32,
    pub residual_loss_db_per_cm: f64,
}

impl Default for WaveguideSection {
    fn default() -> Self {
        let p = BicModelParams::default();
        Self { kx: p.kx, l0: p.l0, c_gc: p.c_gc, mode_order: p.mode_order, residual_loss_db_per_cm: 0.0 }
    }
}

impl WaveguideSection {
    pub fn params(&self) -> BicModelParams {
        BicModelParams { kx: self.kx, l0: self.l0, c_gc: self.c_gc, mode_order: self.mode_order }
    }
}

/// Wire template. When `bias` is set, `eta_int` and `dark_rate_hz` are taken
/// from the bias curve instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub alpha_db_per_um: f64,
    pub eta_int: f64,
    pub dead_time_ps: f64,
    pub jitter_fwhm_ps: f64,
    pub dark_rate_hz: f64,
    pub bias: Option<f64>,
    pub bias_curve: BiasCurve,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let w = NanowireSpec::default();
        Self {
            alpha_db_per_um: w.alpha_db_per_um,
            eta_int: w.eta_int,
            dead_time_ps: w.dead_time_ps,
            jitter_fwhm_ps: w.jitter_fwhm_ps,
            dark_rate_hz: w.dark_rate_hz,
            bias: None,
            bias_curve: BiasCurve::default(),
        }
    }
}

impl DetectorSection {
    pub fn template(&self) -> Result<NanowireSpec, ConfigError> {
        let err = |e: inline_snspd::Error| ConfigError::new("detector", e);
        let mut w = NanowireSpec {
            length_um: 0.0,
            alpha_db_per_um: self.alpha_db_per_um,
            eta_int: self.eta_int,
            dead_time_ps: self.dead_time_ps,
            jitter_fwhm_ps: self.jitter_fwhm_ps,
            dark_rate_hz: self.dark_rate_hz,
        };
        if let Some(bias) = self.bias {
            self.bias_curve.validate().map_err(err)?;
            w.eta_int = internal_efficiency(bias, &self.bias_curve).map_err(err)?;
            w.dark_rate_hz = dark_rate(bias, &self.bias_curve).map_err(err)?;
        }
        w.validate().map_err(err)?;
        Ok(w)
    }
}

/// Either explicit per-wire input fractions or an equal split over `n` wires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeSection {
    pub n: Option<usize>,
    pub fractions: Option<Vec<f64>>,
    pub last_cap: f64,
}

impl Default for CascadeSection {
    fn default() -> Self {
        Self { n: Some(2), fractions: None, last_cap: DEFAULT_LAST_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub w_coinc_ps: i64,
    pub w_bin_ps: i64,
    pub tau_range_ps: i64,
    /// Half-width of the acceptance window around each trigger.
    pub trigger_half_window_ps: i64,
    pub jitter_bin_ps: i64,
    pub jitter_t_min_ps: i64,
    pub jitter_t_max_ps: i64,
    pub pnr_nbar_min: f64,
    pub pnr_nbar_max: f64,
    pub pnr_points: usize,
    /// Efficiency roll-off `b` in `η/(1 + b·n̄)`; 0 disables it.
    pub pnr_rolloff: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let g = ConditionalG2Config::default();
        Self {
            w_coinc_ps: g.w_coinc_ps,
            w_bin_ps: g.w_bin_ps,
            tau_range_ps: g.tau_range_ps,
            trigger_half_window_ps: 1_000,
            jitter_bin_ps: 4,
            jitter_t_min_ps: -500,
            jitter_t_max_ps: 500,
            pnr_nbar_min: 0.01,
            pnr_nbar_max: 3.0,
            pnr_points: 7,
            pnr_rolloff: 0.0,
        }
    }
}

impl AnalysisSection {
    pub fn g2(&self) -> ConditionalG2Config {
        ConditionalG2Config { w_coinc_ps: self.w_coinc_ps, w_bin_ps: self.w_bin_ps, tau_range_ps: self.tau_range_ps }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub waveguide: WaveguideSection,
    pub detector: DetectorSection,
    pub cascade: CascadeSection,
    pub source: SourceSpec,
    pub run: RunConfig,
    pub analysis: AnalysisSection,
}

impl ToolkitConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::new("", e.to_string().trim_end()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.waveguide.params().validate().map_err(|e| ConfigError::new("waveguide", e))?;
        self.detector.template()?;
        self.cascade()?;
        self.source.validate().map_err(|e| ConfigError::new("source", e))?;
        self.run.extent().map_err(|e| ConfigError::new("run", e))?;
        if self.run.trigger_jitter_fwhm_ps < 0.0 || self.run.readout_jitter_fwhm_ps < 0.0 {
            return Err(ConfigError::new("run", "jitters must be non-negative"));
        }
        self.layout()?;
        let a = &self.analysis;
        self.analysis.g2().validate().map_err(|e| ConfigError::new("analysis", e))?;
        let ok = a.trigger_half_window_ps >= 0
            && a.jitter_bin_ps > 0
            && a.jitter_t_min_ps < a.jitter_t_max_ps
            && a.pnr_nbar_min > 0.0
            && a.pnr_nbar_max >= a.pnr_nbar_min
            && a.pnr_points >= 1
            && a.pnr_rolloff >= 0.0;
        if !ok {
            return Err(ConfigError::new("analysis", format!("inconsistent analysis settings {a:?}")));
        }
        Ok(())
    }

    pub fn cascade(&self) -> Result<CascadeDesign, ConfigError> {
        let c = &self.cascade;
        let fractions = match (&c.fractions, c.n) {
            (Some(f), _) => f.clone(),
            (None, Some(0)) => Vec::new(),
            (None, Some(n)) => vec![1.0 / n as f64; n],
            (None, None) => return Err(ConfigError::new("cascade", "set either n or fractions")),
        };
        let template = self.detector.template()?;
        design_with_template(&fractions, &template, c.last_cap).map_err(|e| ConfigError::new("cascade", e))
    }

    pub fn layout(&self) -> Result<ChannelLayout, ConfigError> {
        let n = self.cascade()?.len();
        ChannelLayout::new(n, self.run.aux_channel).map_err(|e| ConfigError::new("run", e))
    }
}
