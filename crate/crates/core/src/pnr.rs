//! Photon-number resolution with inline detector arrays.
//!
//! For a coherent pulse of mean photon number `n̄`, wire `i` (total efficiency
//! `η_i` referenced to the chip input) sees a Poisson-thinned photon number
//! and clicks with probability `1 − e^{−n̄η_i}`, independently of the others.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::simkernel::TagStream;

pub const PLANCK_J_S: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
/// Largest enumeration accepted by [`fock_fidelity_bruteforce`].
pub const BRUTEFORCE_LIMIT: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickStatistics {
    /// `p[k]`: probability of exactly `k` wires clicking.
    pub p: Vec<f64>,
    pub nbar: f64,
}

impl ClickStatistics {
    pub fn get(&self, k: usize) -> f64 {
        self.p.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean_clicks(&self) -> f64 {
        self.p.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCalibration {
    /// Power at the monitor, W.
    pub p_pm_w: f64,
    /// Total transmission from monitor to chip.
    pub a_losses: f64,
    /// Repetition rate, Hz.
    pub c_tr_hz: f64,
    pub wavelength_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRates {
    pub c1: f64,
    pub c2: f64,
    pub c12: f64,
    pub c_tr: f64,
}

fn check_etas(etas: &[f64]) -> Result<()> {
    if let Some(e) = etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return domain(format!("efficiency {e} outside [0, 1]"));
    }
    Ok(())
}

fn check_nbar(nbar: f64) -> Result<()> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return domain(format!("mean photon number must be non-negative, got {nbar}"));
    }
    Ok(())
}

pub fn click_probs_two(nbar: f64, eta1: f64, eta2: f64) -> Result<ClickStatistics> {
    check_nbar(nbar)?;
    check_etas(&[eta1, eta2])?;
    let p01 = (-nbar * eta1).exp();
    let p02 = (-nbar * eta2).exp();
    let p0 = p01 * p02;
    let p1 = (1.0 - p01) * p02 + (1.0 - p02) * p01;
    let p2 = (1.0 - p02) * (1.0 - p01);
    Ok(ClickStatistics { p: vec![p0, p1, p2], nbar })
}

/// Distribution of the number of clicking wires: Poisson-binomial over the
/// per-wire click probabilities.
pub fn click_pattern_probs(nbar: f64, etas: &[f64]) -> Result<ClickStatistics> {
    check_nbar(nbar)?;
    check_etas(etas)?;
    let mut p = vec![1.0];
    for eta in etas {
        let q = (-nbar * eta).exp();
        let mut next = vec![0.0; p.len() + 1];
        for (k, pk) in p.iter().enumerate() {
            next[k] += pk * q;
            next[k + 1] += pk * (1.0 - q);
        }
        p = next;
    }
    Ok(ClickStatistics { p, nbar })
}

/// Effective efficiencies under the optional high-flux roll-off
/// `η/(1 + b·n̄)`; `b = 0` leaves them unchanged.
pub fn rolled_off_etas(etas: &[f64], nbar: f64, rolloff: f64) -> Result<Vec<f64>> {
    check_nbar(nbar)?;
    if !(rolloff >= 0.0 && rolloff.is_finite()) {
        return domain(format!("roll-off coefficient must be non-negative, got {rolloff}"));
    }
    Ok(etas.iter().map(|e| e / (1.0 + rolloff * nbar)).collect())
}

/// Empirical click probabilities from single and coincidence rates.
pub fn estimate_from_counts(rates: &CountRates) -> Result<ClickStatistics> {
    let CountRates { c1, c2, c12, c_tr } = *rates;
    let ok = [c1, c2, c12].iter().all(|c| *c >= 0.0) && c_tr > 0.0 && c12 <= c1.min(c2) && c1.max(c2) <= c_tr;
    if !ok {
        return domain(format!("inconsistent count rates {rates:?}"));
    }
    let p2 = c12 / c_tr;
    let p1 = (c1 + c2 - 2.0 * c12) / c_tr;
    Ok(ClickStatistics { p: vec![1.0 - (p1 + p2), p1, p2], nbar: f64::NAN })
}

pub fn estimate_nbar(p0: f64, etas: &[f64]) -> Result<f64> {
    check_etas(etas)?;
    let total: f64 = etas.iter().sum();
    if !(p0 > 0.0 && p0 <= 1.0) {
        return domain(format!("no-click probability must be in (0, 1], got {p0}"));
    }
    if total <= 0.0 {
        return domain("total efficiency must be positive");
    }
    Ok(-p0.ln() / total)
}

pub fn photon_energy_j(wavelength_m: f64) -> f64 {
    PLANCK_J_S * SPEED_OF_LIGHT_M_S / wavelength_m
}

pub fn mean_photon_from_power(cal: &PowerCalibration) -> Result<f64> {
    let ok = cal.p_pm_w > 0.0 && cal.a_losses > 0.0 && cal.a_losses <= 1.0 && cal.c_tr_hz > 0.0 && cal.wavelength_m > 0.0;
    if !ok {
        return domain(format!("invalid power calibration {cal:?}"));
    }
    Ok(cal.p_pm_w * cal.a_losses / (cal.c_tr_hz * photon_energy_j(cal.wavelength_m)))
}

/// Probability that `n` photons spread uniformly over `n_det` ideal wires hit
/// `n` distinct wires: `Π_{k<n} (1 − k/n_det)`.
pub fn fock_fidelity(n: u32, n_det: u32) -> Result<f64> {
    check_fock(n, n_det)?;
    Ok((0..n).map(|k| 1.0 - f64::from(k) / f64::from(n_det)).product::<f64>().max(0.0))
}

/// [`fock_fidelity`] as an exact ratio `n_det!/((n_det − n)!·n_det^n)`.
pub fn fock_fidelity_exact(n: u32, n_det: u32) -> Result<Ratio<u128>> {
    check_fock(n, n_det)?;
    if n > n_det {
        return Ok(Ratio::from_integer(0));
    }
    let overflow = || Error::Size(format!("fidelity ratio for n = {n}, {n_det} detectors overflows"));
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for k in 0..n {
        num = num.checked_mul(u128::from(n_det - k)).ok_or_else(overflow)?;
        den = den.checked_mul(u128::from(n_det)).ok_or_else(overflow)?;
    }
    Ok(Ratio::new(num, den))
}

/// Exact enumeration of all `n_det^n` photon-to-wire assignments.
pub fn fock_fidelity_bruteforce(n: u32, n_det: u32) -> Result<Ratio<u128>> {
    check_fock(n, n_det)?;
    let total = u64::from(n_det)
        .checked_pow(n)
        .filter(|t| *t <= BRUTEFORCE_LIMIT)
        .ok_or_else(|| Error::Size(format!("{n_det}^{n} assignments exceed {BRUTEFORCE_LIMIT}")))?;
    let d = u64::from(n_det);
    let injective: u64 = (0..total)
        .into_par_iter()
        .filter(|&code| {
            let mut digits = Vec::with_capacity(n as usize);
            let mut c = code;
            for _ in 0..n {
                let w = c % d;
                if digits.contains(&w) {
                    return false;
                }
                digits.push(w);
                c /= d;
            }
            true
        })
        .count() as u64;
    Ok(Ratio::new(u128::from(injective), u128::from(total)))
}

fn check_fock(n: u32, n_det: u32) -> Result<()> {
    if n == 0 || n_det == 0 {
        return domain(format!("need n ≥ 1 and n_det ≥ 1, got n = {n}, n_det = {n_det}"));
    }
    Ok(())
}

/// Per-trigger click tallies over a set of wire channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerTally {
    pub triggers: u64,
    /// Triggers in which each wire clicked at least once.
    pub singles: Vec<u64>,
    /// Triggers with both of the first two wires clicking.
    pub coincidences: u64,
    /// `by_clicks[k]`: triggers with exactly `k` wires clicking.
    pub by_clicks: Vec<u64>,
}

impl TriggerTally {
    pub fn rates(&self, duration_s: f64) -> Result<CountRates> {
        if self.singles.len() != 2 {
            return Err(Error::Config(format!("two wires needed, tally has {}", self.singles.len())));
        }
        let r = |c: u64| c as f64 / duration_s;
        Ok(CountRates { c1: r(self.singles[0]), c2: r(self.singles[1]), c12: r(self.coincidences), c_tr: r(self.triggers) })
    }

    pub fn statistics(&self) -> ClickStatistics {
        let n = self.triggers.max(1) as f64;
        ClickStatistics { p: self.by_clicks.iter().map(|c| *c as f64 / n).collect(), nbar: f64::NAN }
    }
}

/// Count, for every trigger, which wires clicked within `±half_window` of it.
pub fn tally_triggers(stream: &TagStream, trigger_channel: u16, wires: &[u16], half_window_ps: i64) -> Result<TriggerTally> {
    if trigger_channel >= stream.channel_count || wires.iter().any(|w| *w >= stream.channel_count) {
        return Err(Error::Config(format!(
            "channels {trigger_channel}/{wires:?} not in a {}-channel stream",
            stream.channel_count
        )));
    }
    let triggers = stream.channel(trigger_channel);
    if triggers.is_empty() {
        return Err(Error::Precondition(format!("no trigger tags on channel {trigger_channel}")));
    }
    let lists: Vec<Vec<i64>> = wires.iter().map(|w| stream.channel(*w)).collect();
    let mut ptr = vec![0usize; wires.len()];
    let mut singles = vec![0u64; wires.len()];
    let mut by_clicks = vec![0u64; wires.len() + 1];
    let mut coincidences = 0;
    for &t in &triggers {
        let mut clicked = 0;
        let mut first_two = 0;
        for (i, list) in lists.iter().enumerate() {
            while ptr[i] < list.len() && list[ptr[i]] < t - half_window_ps {
                ptr[i] += 1;
            }
            if ptr[i] < list.len() && list[ptr[i]] <= t + half_window_ps {
                singles[i] += 1;
                clicked += 1;
                if i < 2 {
                    first_two += 1;
                }
            }
        }
        by_clicks[clicked] += 1;
        if first_two == 2 {
            coincidences += 1;
        }
    }
    Ok(TriggerTally { triggers: triggers.len() as u64, singles, coincidences, by_clicks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn two_detector_examples() {
        assert_eq!(click_probs_two(0.0, 0.5, 0.5).unwrap().p, vec![1.0, 0.0, 0.0]);
        let s = click_probs_two(1.0, 0.5, 0.5).unwrap();
        for (p, e) in s.p.iter().zip([0.36788, 0.47730, 0.15482]) {
            assert!((p - e).abs() < 1e-5, "{p}");
        }
        for nbar in [0.01, 1.0, 30.0] {
            assert_eq!(click_probs_two(nbar, 0.4, 0.0).unwrap().p[2], 0.0);
        }
        assert!(click_probs_two(-1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn pattern_probs_reduce_to_two() {
        let a = click_pattern_probs(0.8, &[0.3, 0.6]).unwrap();
        let b = click_probs_two(0.8, 0.3, 0.6).unwrap();
        for (x, y) in a.p.iter().zip(&b.p) {
            assert_relative_eq!(*x, *y, epsilon = 1e-15);
        }
        assert_eq!(click_pattern_probs(2.0, &[0.0; 4]).unwrap().p[0], 1.0);
    }

    #[test]
    fn small_nbar_series() {
        let etas = [0.2; 5];
        let nbar = 1e-3;
        let p1 = click_pattern_probs(nbar, &etas).unwrap().p[1];
        assert!((p1 - nbar * 1.0).abs() < 2.0 * nbar * nbar);
    }

    #[test]
    fn count_estimates() {
        let z = estimate_from_counts(&CountRates { c1: 0.0, c2: 0.0, c12: 0.0, c_tr: 5e7 }).unwrap();
        assert_eq!(z.p, vec![1.0, 0.0, 0.0]);
        let all = estimate_from_counts(&CountRates { c1: 5e7, c2: 5e7, c12: 5e7, c_tr: 5e7 }).unwrap();
        assert_eq!(all.p, vec![0.0, 0.0, 1.0]);
        assert!(estimate_from_counts(&CountRates { c1: 1.0, c2: 1.0, c12: 2.0, c_tr: 5.0 }).is_err());
    }

    #[test]
    fn nbar_inversion() {
        assert_eq!(estimate_nbar(1.0, &[0.5]).unwrap(), 0.0);
        assert_relative_eq!(estimate_nbar((-1.0f64).exp(), &[0.25, 0.75]).unwrap(), 1.0, epsilon = 1e-15);
        assert!(estimate_nbar(0.0, &[0.5]).is_err());
        assert!(estimate_nbar(0.5, &[0.0]).is_err());
    }

    #[test]
    fn power_calibration() {
        let e = photon_energy_j(1550e-9);
        assert!((e - 1.2816e-19).abs() < 1e-23, "{e}");
        let cal = PowerCalibration { p_pm_w: 1e-12, a_losses: 1.0, c_tr_hz: 5e7, wavelength_m: 1550e-9 };
        let n = mean_photon_from_power(&cal).unwrap();
        assert!((n - 0.156).abs() < 0.001, "{n}");
        let half = mean_photon_from_power(&PowerCalibration { a_losses: 0.5, ..cal }).unwrap();
        assert_relative_eq!(half, n / 2.0, epsilon = 1e-15);
        assert!(mean_photon_from_power(&PowerCalibration { a_losses: 1.5, ..cal }).is_err());
    }

    #[test]
    fn fidelity_examples() {
        for d in 1..10 {
            assert_eq!(fock_fidelity(1, d).unwrap(), 1.0);
        }
        assert_eq!(fock_fidelity(2, 2).unwrap(), 0.5);
        assert_relative_eq!(fock_fidelity(3, 5).unwrap(), 0.48, epsilon = 1e-15);
        assert_eq!(fock_fidelity_bruteforce(2, 2).unwrap(), Ratio::new(1, 2));
        assert_eq!(fock_fidelity_bruteforce(4, 3).unwrap(), Ratio::from_integer(0));
        assert_eq!(fock_fidelity(4, 3).unwrap(), 0.0);
        assert!(matches!(fock_fidelity_bruteforce(12, 10), Err(Error::Size(_))));
        assert!(fock_fidelity(0, 3).is_err());
    }

    #[test]
    fn closed_form_equals_enumeration() {
        for n in 1..=6 {
            for d in 1..=8 {
                assert_eq!(fock_fidelity_exact(n, d).unwrap(), fock_fidelity_bruteforce(n, d).unwrap(), "n {n} d {d}");
            }
        }
    }

    #[test]
    fn fidelity_monotonicity() {
        for n in 1..8 {
            for d in 1..30 {
                assert!(fock_fidelity(n, d + 1).unwrap() >= fock_fidelity(n, d).unwrap());
                assert!(fock_fidelity(n + 1, d).unwrap() <= fock_fidelity(n, d).unwrap());
            }
        }
    }

    #[test]
    fn rolloff_knob() {
        assert_eq!(rolled_off_etas(&[0.4, 0.5], 3.0, 0.0).unwrap(), vec![0.4, 0.5]);
        assert_eq!(rolled_off_etas(&[0.4], 1.0, 1.0).unwrap(), vec![0.2]);
    }

    proptest! {
        #[test]
        fn pattern_probs_normalised(nbar in 0.0f64..20.0, etas in prop::collection::vec(0.0f64..=1.0, 0..12)) {
            let s = click_pattern_probs(nbar, &etas).unwrap();
            prop_assert!((s.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(s.p.iter().all(|p| *p >= 0.0));
        }

        #[test]
        fn nbar_round_trip(nbar in 0.0f64..5.0, etas in prop::collection::vec(0.01f64..=1.0, 1..8)) {
            let p0 = click_pattern_probs(nbar, &etas).unwrap().p[0];
            prop_assert!((estimate_nbar(p0, &etas).unwrap() - nbar).abs() < 1e-9);
        }

        #[test]
        fn linear_regime(nbar in 0.0001f64..0.1, e1 in 0.0f64..0.5, e2 in 0.0f64..0.5) {
            let s = click_probs_two(nbar, e1, e2).unwrap();
            let lin = nbar * (e1 + e2);
            prop_assume!(lin > 0.0);
            prop_assert!(((s.p[1] + 2.0 * s.p[2]) - lin).abs() <= 0.05 * lin);
        }
    }
}
