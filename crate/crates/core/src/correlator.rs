//! Coincidence counting and g² estimators over sorted tag lists.
//!
//! All windows are closed intervals on integer picoseconds: a partner at
//! offset `Δ` is inside a window of full width `w` iff `2|Δ| ≤ w`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_ps: i64,
    /// Left edge of bin 0.
    pub t_min_ps: i64,
    pub counts: Vec<u64>,
    pub total_starts: u64,
}

impl Histogram {
    pub fn bin_starts(&self) -> Vec<i64> {
        (0..self.counts.len() as i64).map(|k| self.t_min_ps + k * self.bin_width_ps).collect()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_starts().iter().map(|s| *s as f64 + self.bin_width_ps as f64 / 2.0).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionalG2Config {
    pub w_coinc_ps: i64,
    pub w_bin_ps: i64,
    pub tau_range_ps: i64,
}

impl Default for ConditionalG2Config {
    fn default() -> Self {
        Self { w_coinc_ps: 1_000, w_bin_ps: 100, tau_range_ps: 10_000 }
    }
}

impl ConditionalG2Config {
    pub fn validate(&self) -> Result<()> {
        if self.w_coinc_ps <= 0 || self.w_bin_ps <= 0 || self.tau_range_ps < 0 {
            return domain(format!("invalid correlation windows {self:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub taus_ps: Vec<i64>,
    /// `None` where the normalisation vanishes.
    pub values: Vec<Option<f64>>,
    /// Relative uncertainty `1/√N` of the count behind each value.
    pub rel_uncertainties: Vec<f64>,
    /// The count each uncertainty refers to.
    pub counts: Vec<u64>,
}

impl CorrelationResult {
    pub fn value_at(&self, tau_ps: i64) -> Option<f64> {
        self.taus_ps.iter().position(|t| *t == tau_ps).and_then(|i| self.values[i])
    }
}

fn rel_uncertainty(n: u64) -> f64 {
    if n == 0 {
        f64::INFINITY
    } else {
        1.0 / (n as f64).sqrt()
    }
}

fn require_sorted(name: &str, tags: &[i64]) -> Result<()> {
    if tags.windows(2).all(|w| w[0] <= w[1]) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} tags are not time-ordered")))
    }
}

/// Number of `a` tags with at least one `b` tag within `±window/2`.
pub fn pair_coincidences(a: &[i64], b: &[i64], window_ps: i64) -> Result<u64> {
    require_sorted("a", a)?;
    require_sorted("b", b)?;
    if window_ps < 0 {
        return domain(format!("negative window {window_ps}"));
    }
    let mut j = 0;
    let mut count = 0;
    for &t in a {
        while j < b.len() && 2 * (b[j] - t) < -window_ps {
            j += 1;
        }
        if j < b.len() && 2 * (b[j] - t) <= window_ps {
            count += 1;
        }
    }
    Ok(count)
}

/// Start-stop histogram: for every start, the first stop at or after
/// `start + t_min` is histogrammed when it lies before `start + t_max`.
pub fn start_stop_histogram(starts: &[i64], stops: &[i64], bin_width_ps: i64, t_min_ps: i64, t_max_ps: i64) -> Result<Histogram> {
    require_sorted("start", starts)?;
    require_sorted("stop", stops)?;
    if bin_width_ps <= 0 || t_min_ps >= t_max_ps {
        return domain(format!("bad histogram range [{t_min_ps}, {t_max_ps}) / {bin_width_ps}"));
    }
    let bins = (t_max_ps - t_min_ps + bin_width_ps - 1) / bin_width_ps;
    let mut counts = vec![0u64; bins as usize];
    let mut j = 0;
    for &s in starts {
        while j < stops.len() && stops[j] < s + t_min_ps {
            j += 1;
        }
        if let Some(&stop) = stops.get(j) {
            let d = stop - s;
            if d < t_max_ps {
                counts[((d - t_min_ps) / bin_width_ps) as usize] += 1;
            }
        }
    }
    Ok(Histogram { bin_width_ps, t_min_ps, counts, total_starts: starts.len() as u64 })
}

fn centred_bins(bin_width_ps: i64, tau_range_ps: i64) -> (i64, Vec<i64>) {
    let k = tau_range_ps / bin_width_ps;
    (k, (-k..=k).map(|j| j * bin_width_ps).collect())
}

/// Index of the centred bin holding offset `d`, bins `[jw − w/2, jw + w/2)`.
fn centred_index(d: i64, w: i64, k: i64) -> Option<usize> {
    let j = (2 * d + w).div_euclid(2 * w);
    (-k..=k).contains(&j).then(|| (j + k) as usize)
}

/// Cross-correlation histogram of `b` relative to `a`, normalised by the
/// accidental level `r_a·r_b·T·w` so independent streams give 1.
pub fn g2_normalized(a: &[i64], b: &[i64], bin_width_ps: i64, tau_range_ps: i64, duration_ps: i64) -> Result<CorrelationResult> {
    require_sorted("a", a)?;
    require_sorted("b", b)?;
    if bin_width_ps <= 0 || tau_range_ps < 0 || duration_ps <= 0 {
        return domain(format!("bad g² parameters: bin {bin_width_ps}, range {tau_range_ps}, duration {duration_ps}"));
    }
    if a.is_empty() || b.is_empty() {
        return domain("g² normalisation undefined: a channel has no tags");
    }
    let (k, taus) = centred_bins(bin_width_ps, tau_range_ps);
    let reach = k * bin_width_ps + bin_width_ps / 2 + 1;
    let mut counts = vec![0u64; taus.len()];
    let mut lo = 0;
    for &t in a {
        while lo < b.len() && b[lo] < t - reach {
            lo += 1;
        }
        for &u in b[lo..].iter().take_while(|u| **u <= t + reach) {
            if let Some(i) = centred_index(u - t, bin_width_ps, k) {
                counts[i] += 1;
            }
        }
    }
    let norm = a.len() as f64 * b.len() as f64 * bin_width_ps as f64 / duration_ps as f64;
    Ok(CorrelationResult {
        taus_ps: taus,
        values: counts.iter().map(|c| Some(*c as f64 / norm)).collect(),
        rel_uncertainties: counts.iter().map(|c| rel_uncertainty(*c)).collect(),
        counts,
    })
}

/// Raw counts behind [`conditional_g2`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeraldedCounts {
    pub n_i: u64,
    pub n_is1: u64,
    pub n_is2: Vec<u64>,
    pub n_is1s2: Vec<u64>,
}

/// Heralded autocorrelation
/// `g_c(τ) = N_is1s2(0, τ|0)·N_i / (N_is1(0)·N_is2(τ))`.
///
/// An idler counts once towards `N_is1` when any s1 tag lies within
/// `±w_coinc/2`, and once towards `N_is2(τ)` when any s2 tag lies within
/// `τ ± w_bin/2`; triples need both.
pub fn conditional_g2(idler: &[i64], s1: &[i64], s2: &[i64], cfg: &ConditionalG2Config) -> Result<CorrelationResult> {
    let counts = heralded_counts(idler, s1, s2, cfg)?;
    let taus = centred_bins(cfg.w_bin_ps, cfg.tau_range_ps).1;
    let values = counts
        .n_is1s2
        .iter()
        .zip(&counts.n_is2)
        .map(|(&n3, &n2)| {
            let den = counts.n_is1 as f64 * n2 as f64;
            (den > 0.0).then(|| n3 as f64 * counts.n_i as f64 / den)
        })
        .collect();
    Ok(CorrelationResult {
        taus_ps: taus,
        values,
        rel_uncertainties: counts.n_is1s2.iter().map(|c| rel_uncertainty(*c)).collect(),
        counts: counts.n_is1s2,
    })
}

pub fn heralded_counts(idler: &[i64], s1: &[i64], s2: &[i64], cfg: &ConditionalG2Config) -> Result<HeraldedCounts> {
    require_sorted("idler", idler)?;
    require_sorted("s1", s1)?;
    require_sorted("s2", s2)?;
    cfg.validate()?;
    let w = cfg.w_bin_ps;
    let (k, taus) = centred_bins(w, cfg.tau_range_ps);
    let mut n_is2 = vec![0u64; taus.len()];
    let mut n_is1s2 = vec![0u64; taus.len()];
    let mut n_is1 = 0;
    let reach = k * w + w / 2 + 1;
    let (mut j1, mut lo) = (0, 0);
    let mut hit: Vec<usize> = Vec::new();
    for &t in idler {
        while j1 < s1.len() && 2 * (s1[j1] - t) < -cfg.w_coinc_ps {
            j1 += 1;
        }
        let heralded = j1 < s1.len() && 2 * (s1[j1] - t) <= cfg.w_coinc_ps;
        n_is1 += u64::from(heralded);

        while lo < s2.len() && s2[lo] < t - reach {
            lo += 1;
        }
        hit.clear();
        for &u in s2[lo..].iter().take_while(|u| **u <= t + reach) {
            let d = u - t;
            // Closed bins: an offset on a boundary belongs to both neighbours.
            let j = (2 * d + w).div_euclid(2 * w);
            for jj in [j - 1, j] {
                if (-k..=k).contains(&jj) && 2 * (d - jj * w).abs() <= w {
                    hit.push((jj + k) as usize);
                }
            }
        }
        hit.sort_unstable();
        hit.dedup();
        for &b in &hit {
            n_is2[b] += 1;
            if heralded {
                n_is1s2[b] += 1;
            }
        }
    }
    Ok(HeraldedCounts { n_i: idler.len() as u64, n_is1, n_is2, n_is1s2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson_times(rate_per_ps: f64, duration: i64, seed: u64) -> Vec<i64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (rate_per_ps * duration as f64) as usize;
        let mut v: Vec<i64> = (0..n).map(|_| rng.random_range(0..duration)).collect();
        v.sort_unstable();
        v
    }

    fn brute_pairs(a: &[i64], b: &[i64], w: i64) -> u64 {
        a.iter().filter(|t| b.iter().any(|u| 2 * (u - *t).abs() <= w)).count() as u64
    }

    #[test]
    fn coincidence_examples() {
        let a = vec![0, 10, 20, 30];
        assert_eq!(pair_coincidences(&a, &a, 1).unwrap(), 4);
        assert_eq!(pair_coincidences(&a, &[1000, 2000], 100).unwrap(), 0);
        // Boundaries are inclusive.
        assert_eq!(pair_coincidences(&[0], &[5], 10).unwrap(), 1);
        assert_eq!(pair_coincidences(&[0], &[6], 10).unwrap(), 0);
        assert!(matches!(pair_coincidences(&[2, 1], &a, 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn histogram_examples() {
        let starts: Vec<i64> = (0..100).map(|k| k * 10_000).collect();
        let stops: Vec<i64> = starts.iter().map(|s| s + 1234).collect();
        let h = start_stop_histogram(&starts, &stops, 100, -1000, 5000).unwrap();
        assert_eq!(h.counts.len(), 60);
        assert_eq!(h.counts.iter().filter(|c| **c > 0).count(), 1);
        let bin = h.counts.iter().position(|c| *c == 100).unwrap();
        assert!(h.bin_starts()[bin] <= 1234 && 1234 < h.bin_starts()[bin] + 100);
        let empty = start_stop_histogram(&starts, &[], 100, -1000, 5000).unwrap();
        assert_eq!(empty.total(), 0);
        assert_eq!(empty.total_starts, 100);
    }

    #[test]
    fn independent_streams_are_flat() {
        let dur = 1_000_000_000_000i64;
        let a = poisson_times(1e-6, dur, 1);
        let b = poisson_times(1e-6, dur, 2);
        let g = g2_normalized(&a, &b, 100_000, 5_000_000, dur).unwrap();
        for (v, u) in g.values.iter().zip(&g.rel_uncertainties) {
            assert!((v.unwrap() - 1.0).abs() < 0.05f64.max(4.0 * u), "{v:?}");
        }
        let mean: f64 = g.values.iter().map(|v| v.unwrap()).sum::<f64>() / g.values.len() as f64;
        let sigma = 1.0 / (g.counts.iter().sum::<u64>() as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sigma.max(1e-3), "{mean}");
    }

    #[test]
    fn self_correlation_peak() {
        let dur = 1_000_000_000i64;
        let a = poisson_times(1e-5, dur, 3);
        let w = 10;
        let g = g2_normalized(&a, &a, w, 100, dur).unwrap();
        let r = a.len() as f64 / dur as f64;
        let zero = g.value_at(0).unwrap();
        assert!((zero - 1.0 / (r * w as f64)).abs() / zero < 0.01, "{zero}");
        assert!(g2_normalized(&a, &[], w, 100, dur).is_err());
    }

    #[test]
    fn one_photon_per_herald_has_no_triples() {
        let idler: Vec<i64> = (0..10_000).map(|k| k * 20_000).collect();
        let mut s1 = Vec::new();
        let mut s2 = Vec::new();
        for (k, t) in idler.iter().enumerate() {
            if k % 2 == 0 { s1.push(t + 30) } else { s2.push(t - 40) }
        }
        let g = conditional_g2(&idler, &s1, &s2, &ConditionalG2Config::default()).unwrap();
        assert_eq!(g.value_at(0), Some(0.0));
        assert!(g.rel_uncertainties[g.taus_ps.len() / 2].is_infinite());
    }

    #[test]
    fn independent_herald_is_a_no_op() {
        let dur = 2_000_000_000_000i64;
        // Pulsed coherent-like signals on a 20 ns grid, random herald.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s1 = Vec::new();
        let mut s2 = Vec::new();
        for k in 0..dur / 20_000 {
            let t = k * 20_000 + 10_000;
            if rng.random_bool(0.2) { s1.push(t) }
            if rng.random_bool(0.2) { s2.push(t) }
        }
        let idler = poisson_times(5e-7, dur, 5);
        let cfg = ConditionalG2Config { w_coinc_ps: 20_000, w_bin_ps: 20_000, tau_range_ps: 100_000 };
        let g = conditional_g2(&idler, &s1, &s2, &cfg).unwrap();
        for v in &g.values {
            assert!((v.unwrap() - 1.0).abs() < 0.1, "{v:?}");
        }
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = ConditionalG2Config { w_bin_ps: 0, ..Default::default() };
        assert!(conditional_g2(&[], &[], &[], &cfg).is_err());
        let g = conditional_g2(&[], &[], &[], &ConditionalG2Config::default()).unwrap();
        assert!(g.values.iter().all(Option::is_none));
    }

    fn sorted_vec(max_len: usize) -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(0i64..5_000, 0..max_len).prop_map(|mut v| {
            v.sort_unstable();
            v
        })
    }

    proptest! {
        #[test]
        fn two_pointer_matches_brute_force(a in sorted_vec(200), b in sorted_vec(200), w in 0i64..300) {
            prop_assert_eq!(pair_coincidences(&a, &b, w).unwrap(), brute_pairs(&a, &b, w));
        }

        #[test]
        fn histogram_matches_brute_force(a in sorted_vec(60), b in sorted_vec(60), t_min in -200i64..0, span in 1i64..600, bw in 1i64..50) {
            let h = start_stop_histogram(&a, &b, bw, t_min, t_min + span).unwrap();
            let mut expected = vec![0u64; h.counts.len()];
            for s in &a {
                if let Some(stop) = b.iter().find(|u| **u >= s + t_min) {
                    let d = stop - s;
                    if d < t_min + span {
                        expected[((d - t_min) / bw) as usize] += 1;
                    }
                }
            }
            prop_assert_eq!(h.counts, expected);
        }

        #[test]
        fn heralded_counts_match_brute_force(i in sorted_vec(40), s1 in sorted_vec(40), s2 in sorted_vec(40)) {
            let cfg = ConditionalG2Config { w_coinc_ps: 200, w_bin_ps: 50, tau_range_ps: 300 };
            let c = heralded_counts(&i, &s1, &s2, &cfg).unwrap();
            let taus = centred_bins(50, 300).1;
            let near = |t: i64, list: &[i64], c: i64, w: i64| list.iter().any(|u| 2 * (u - t - c).abs() <= w);
            let n1 = i.iter().filter(|t| near(**t, &s1, 0, 200)).count() as u64;
            prop_assert_eq!(c.n_is1, n1);
            for (b, tau) in taus.iter().enumerate() {
                let n2 = i.iter().filter(|t| near(**t, &s2, *tau, 50)).count() as u64;
                let n3 = i.iter().filter(|t| near(**t, &s1, 0, 200) && near(**t, &s2, *tau, 50)).count() as u64;
                prop_assert_eq!(c.n_is2[b], n2);
                prop_assert_eq!(c.n_is1s2[b], n3);
            }
        }

        #[test]
        fn conditional_g2_is_shift_invariant(i in sorted_vec(40), s1 in sorted_vec(40), s2 in sorted_vec(40), shift in -1_000_000i64..1_000_000) {
            let cfg = ConditionalG2Config { w_coinc_ps: 200, w_bin_ps: 50, tau_range_ps: 300 };
            let sh = |v: &[i64]| v.iter().map(|t| t + shift).collect::<Vec<_>>();
            let g = conditional_g2(&i, &s1, &s2, &cfg).unwrap();
            let h = conditional_g2(&sh(&i), &sh(&s1), &sh(&s2), &cfg).unwrap();
            prop_assert_eq!(g, h);
        }

        #[test]
        fn uncertainty_is_inverse_sqrt_count(a in sorted_vec(100), b in sorted_vec(100)) {
            prop_assume!(!a.is_empty() && !b.is_empty());
            let g = g2_normalized(&a, &b, 25, 200, 5_000).unwrap();
            for (c, u) in g.counts.iter().zip(&g.rel_uncertainties) {
                if *c > 0 {
                    prop_assert_eq!(*u, 1.0 / (*c as f64).sqrt());
                }
            }
        }
    }
}
