//! Statistical photon sources.
//!
//! Pulsed sources emit every photon of a pulse at the trigger instant. The CW
//! SPDC source is a homogeneous Poisson process of pairs; each pair gives one
//! herald (idler) detection and one signal photon.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{Domain, StreamFactory};
use crate::{FWHM_PER_SIGMA, PS_PER_S};

/// Length of one independently seeded block of the CW pair process, ps.
pub(crate) const PAIR_BLOCK_PS: i64 = 1_000_000_000;

fn default_rep_rate() -> f64 {
    50e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    CoherentPulsed {
        nbar: f64,
        #[serde(default = "default_rep_rate")]
        rep_rate_hz: f64,
    },
    Thermal {
        nbar: f64,
        #[serde(default = "default_rep_rate")]
        rep_rate_hz: f64,
    },
    FockPulsed {
        n: u32,
        #[serde(default = "default_rep_rate")]
        rep_rate_hz: f64,
    },
    SpdcCw {
        pair_rate_hz: f64,
        herald_efficiency: f64,
        signal_transmission: f64,
        herald_jitter_fwhm_ps: f64,
    },
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::CoherentPulsed { nbar: 1.0, rep_rate_hz: default_rep_rate() }
    }
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SourceSpec::CoherentPulsed { nbar, rep_rate_hz } | SourceSpec::Thermal { nbar, rep_rate_hz } => {
                nbar >= 0.0 && nbar.is_finite() && rep_rate_hz > 0.0
            }
            SourceSpec::FockPulsed { rep_rate_hz, .. } => rep_rate_hz > 0.0,
            SourceSpec::SpdcCw { pair_rate_hz, herald_efficiency, signal_transmission, herald_jitter_fwhm_ps } => {
                pair_rate_hz > 0.0
                    && (0.0..=1.0).contains(&herald_efficiency)
                    && (0.0..=1.0).contains(&signal_transmission)
                    && herald_jitter_fwhm_ps >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid source {self:?}"))
        }
    }

    pub fn is_pulsed(&self) -> bool {
        !matches!(self, SourceSpec::SpdcCw { .. })
    }

    /// Repetition rate of a pulsed source.
    pub fn rep_rate_hz(&self) -> Option<f64> {
        match *self {
            SourceSpec::CoherentPulsed { rep_rate_hz, .. }
            | SourceSpec::Thermal { rep_rate_hz, .. }
            | SourceSpec::FockPulsed { rep_rate_hz, .. } => Some(rep_rate_hz),
            SourceSpec::SpdcCw { .. } => None,
        }
    }

    /// Mean photons per pulse of a pulsed source.
    pub fn mean_photons(&self) -> Option<f64> {
        match *self {
            SourceSpec::CoherentPulsed { nbar, .. } | SourceSpec::Thermal { nbar, .. } => Some(nbar),
            SourceSpec::FockPulsed { n, .. } => Some(f64::from(n)),
            SourceSpec::SpdcCw { .. } => None,
        }
    }

    /// Same source with a new mean photon number (pulsed coherent/thermal only).
    pub fn with_nbar(self, nbar: f64) -> Result<Self> {
        match self {
            SourceSpec::CoherentPulsed { rep_rate_hz, .. } => Ok(SourceSpec::CoherentPulsed { nbar, rep_rate_hz }),
            SourceSpec::Thermal { rep_rate_hz, .. } => Ok(SourceSpec::Thermal { nbar, rep_rate_hz }),
            other => Err(Error::WrongVariant(format!("{other:?} has no mean photon number"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionEvent {
    /// Emission (pulsed) or pair-creation (SPDC) time, ps.
    pub time_ps: i64,
    /// Photons sent into the signal path.
    pub photons: u32,
    /// Detection time of the herald of this pair, when it was detected.
    pub herald_time_ps: Option<i64>,
}

/// Trigger `k` of a pulsed source, in ps.
pub fn trigger_time_ps(k: u64, rep_rate_hz: f64) -> i64 {
    (k as f64 * PS_PER_S / rep_rate_hz).round() as i64
}

/// Photon count of pulse `index`, drawn from its own stream.
pub(crate) fn draw_pulse_photons(spec: &SourceSpec, factory: &StreamFactory, index: u64) -> u32 {
    match *spec {
        SourceSpec::FockPulsed { n, .. } => n,
        SourceSpec::CoherentPulsed { nbar, .. } | SourceSpec::Thermal { nbar, .. } if nbar == 0.0 => 0,
        SourceSpec::CoherentPulsed { nbar, .. } => {
            let mut rng = factory.stream(index);
            Poisson::new(nbar).expect("nbar validated").sample(&mut rng) as u32
        }
        SourceSpec::Thermal { nbar, .. } => {
            // Bose-Einstein: P(k) = nbar^k/(1+nbar)^(k+1), a geometric law
            // counting failures before the first success with p = 1/(1+nbar).
            let mut rng = factory.stream(index);
            Geometric::new(1.0 / (1.0 + nbar)).expect("nbar validated").sample(&mut rng) as u32
        }
        SourceSpec::SpdcCw { .. } => unreachable!("pulsed sources only"),
    }
}

/// One event per trigger, at `k/rep_rate`.
pub fn sample_pulse_counts(spec: &SourceSpec, n_triggers: u64, seed: u64) -> Result<Vec<EmissionEvent>> {
    spec.validate()?;
    let rep = spec
        .rep_rate_hz()
        .ok_or_else(|| Error::WrongVariant("sample_pulse_counts needs a pulsed source".into()))?;
    let factory = StreamFactory::new(seed, Domain::SourcePulses);
    Ok((0..n_triggers)
        .map(|k| EmissionEvent {
            time_ps: trigger_time_ps(k, rep),
            photons: draw_pulse_photons(spec, &factory, k),
            herald_time_ps: None,
        })
        .collect())
}

/// A pair created at `time_ps`, with the fate of both photons already drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pair {
    pub time_ps: i64,
    pub herald_ps: Option<i64>,
    pub signal: bool,
}

/// Pairs of block `block` (covering `[block·B, (block+1)·B)` clipped to the
/// run), sorted by creation time.
pub(crate) fn spdc_block(spec: &SourceSpec, factory: &StreamFactory, block: u64, duration_ps: i64) -> Vec<Pair> {
    let SourceSpec::SpdcCw { pair_rate_hz, herald_efficiency, signal_transmission, herald_jitter_fwhm_ps } = *spec
    else {
        unreachable!("SPDC only")
    };
    let start = block as i64 * PAIR_BLOCK_PS;
    let end = (start + PAIR_BLOCK_PS).min(duration_ps);
    if end <= start {
        return Vec::new();
    }
    let mut rng = factory.stream(block);
    let mean = pair_rate_hz * (end - start) as f64 / PS_PER_S;
    let count = Poisson::new(mean).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
    let mut times: Vec<i64> = (0..count).map(|_| rng.random_range(start..end)).collect();
    times.sort_unstable();
    let jitter = Normal::new(0.0, herald_jitter_fwhm_ps / FWHM_PER_SIGMA).expect("non-negative jitter");
    times
        .into_iter()
        .map(|t| {
            let herald = rng.random_bool(herald_efficiency);
            let smear = jitter.sample(&mut rng);
            let signal = rng.random_bool(signal_transmission);
            let h = (t as f64 + smear).round() as i64;
            Pair {
                time_ps: t,
                herald_ps: (herald && (0..=duration_ps).contains(&h)).then_some(h),
                signal,
            }
        })
        .collect()
}

pub(crate) fn duration_to_ps(duration_s: f64) -> Result<i64> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return domain(format!("run duration must be positive, got {duration_s} s"));
    }
    Ok((duration_s * PS_PER_S).round() as i64)
}

/// Herald detection times (sorted) and the transmitted signal photons.
pub fn sample_spdc_stream(spec: &SourceSpec, duration_s: f64, seed: u64) -> Result<(Vec<i64>, Vec<EmissionEvent>)> {
    spec.validate()?;
    if spec.is_pulsed() {
        return Err(Error::WrongVariant("sample_spdc_stream needs an SPDC source".into()));
    }
    let duration_ps = duration_to_ps(duration_s)?;
    let factory = StreamFactory::new(seed, Domain::SourcePairs);
    let blocks = (duration_ps + PAIR_BLOCK_PS - 1) / PAIR_BLOCK_PS;
    let mut heralds = Vec::new();
    let mut signal = Vec::new();
    for b in 0..blocks as u64 {
        for pair in spdc_block(spec, &factory, b, duration_ps) {
            if let Some(h) = pair.herald_ps {
                heralds.push(h);
            }
            if pair.signal {
                signal.push(EmissionEvent { time_ps: pair.time_ps, photons: 1, herald_time_ps: pair.herald_ps });
            }
        }
    }
    heralds.sort_unstable();
    Ok((heralds, signal))
}

/// Zero-delay g² of the pulsed photon-number distribution.
pub fn theoretical_g2_zero(spec: &SourceSpec) -> Result<f64> {
    match *spec {
        SourceSpec::CoherentPulsed { .. } => Ok(1.0),
        SourceSpec::Thermal { .. } => Ok(2.0),
        SourceSpec::FockPulsed { n: 0, .. } => domain("g²(0) is undefined for the vacuum"),
        SourceSpec::FockPulsed { n, .. } => Ok(1.0 - 1.0 / f64::from(n)),
        SourceSpec::SpdcCw { .. } => Err(Error::WrongVariant(
            "heralded SPDC g² has no closed form here; simulate and use the conditional estimator".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(events: &[EmissionEvent]) -> (f64, f64) {
        let n = events.len() as f64;
        let mean = events.iter().map(|e| f64::from(e.photons)).sum::<f64>() / n;
        let var = events.iter().map(|e| (f64::from(e.photons) - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn fock_and_vacuum_pulses() {
        let fock = sample_pulse_counts(&SourceSpec::FockPulsed { n: 1, rep_rate_hz: 50e6 }, 1000, 1).unwrap();
        assert!(fock.iter().all(|e| e.photons == 1));
        assert_eq!(fock[3].time_ps, 60_000);
        let vac = sample_pulse_counts(&SourceSpec::CoherentPulsed { nbar: 0.0, rep_rate_hz: 50e6 }, 1000, 1).unwrap();
        assert!(vac.iter().all(|e| e.photons == 0));
    }

    #[test]
    fn coherent_statistics() {
        let ev = sample_pulse_counts(&SourceSpec::CoherentPulsed { nbar: 1.0, rep_rate_hz: 50e6 }, 1_000_000, 11).unwrap();
        let (mean, var) = moments(&ev);
        assert!((0.997..=1.003).contains(&mean), "mean {mean}");
        // Var of the sample variance of Poisson(1) is about (μ + 2μ²)/N = 3e-6.
        assert!((var / mean - 1.0).abs() < 3.0 * (3e-6f64).sqrt() * 1.5, "fano {}", var / mean);
    }

    #[test]
    fn thermal_statistics() {
        let nbar = 0.5;
        let ev = sample_pulse_counts(&SourceSpec::Thermal { nbar, rep_rate_hz: 50e6 }, 1_000_000, 5).unwrap();
        let (mean, var) = moments(&ev);
        assert!((mean - nbar).abs() < 3.0 * (nbar * (1.0 + nbar) / 1e6).sqrt());
        assert!((var / mean - (1.0 + nbar)).abs() < 0.02, "fano {}", var / mean);
    }

    #[test]
    fn wrong_variants() {
        let spdc = SourceSpec::SpdcCw {
            pair_rate_hz: 1e5,
            herald_efficiency: 0.5,
            signal_transmission: 0.5,
            herald_jitter_fwhm_ps: 450.0,
        };
        assert!(matches!(sample_pulse_counts(&spdc, 10, 0), Err(Error::WrongVariant(_))));
        assert!(matches!(
            sample_spdc_stream(&SourceSpec::default(), 1.0, 0),
            Err(Error::WrongVariant(_))
        ));
        assert!(sample_spdc_stream(&spdc, 0.0, 0).is_err());
        assert!(theoretical_g2_zero(&spdc).is_err());
    }

    #[test]
    fn spdc_pair_count_and_ordering() {
        let spec = SourceSpec::SpdcCw {
            pair_rate_hz: 1e5,
            herald_efficiency: 1.0,
            signal_transmission: 1.0,
            herald_jitter_fwhm_ps: 450.0,
        };
        let (heralds, signal) = sample_spdc_stream(&spec, 1.0, 3).unwrap();
        let n = signal.len() as f64;
        assert!((n - 1e5).abs() < 3.0 * 1e5f64.sqrt(), "pairs {n}");
        assert!(heralds.windows(2).all(|w| w[0] <= w[1]));
        assert!(signal.windows(2).all(|w| w[0].time_ps <= w[1].time_ps));
        // Herald jitter is centred on the creation time with the configured width.
        let d: Vec<f64> = signal
            .iter()
            .filter_map(|e| e.herald_time_ps.map(|h| (h - e.time_ps) as f64))
            .collect();
        let sd = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
        assert!((sd * FWHM_PER_SIGMA - 450.0).abs() < 10.0, "fwhm {}", sd * FWHM_PER_SIGMA);

        let (again_h, again_s) = sample_spdc_stream(&spec, 1.0, 3).unwrap();
        assert_eq!(heralds, again_h);
        assert_eq!(signal, again_s);

        let mut blind = spec;
        if let SourceSpec::SpdcCw { herald_efficiency, .. } = &mut blind {
            *herald_efficiency = 0.0;
        }
        assert!(sample_spdc_stream(&blind, 0.1, 3).unwrap().0.is_empty());
    }

    #[test]
    fn g2_zero_reference_values() {
        assert_eq!(theoretical_g2_zero(&SourceSpec::default()).unwrap(), 1.0);
        assert_eq!(theoretical_g2_zero(&SourceSpec::Thermal { nbar: 0.3, rep_rate_hz: 1e6 }).unwrap(), 2.0);
        assert_eq!(theoretical_g2_zero(&SourceSpec::FockPulsed { n: 1, rep_rate_hz: 1e6 }).unwrap(), 0.0);
        assert_eq!(theoretical_g2_zero(&SourceSpec::FockPulsed { n: 4, rep_rate_hz: 1e6 }).unwrap(), 0.75);
    }
}
