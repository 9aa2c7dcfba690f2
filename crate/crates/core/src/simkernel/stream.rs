use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::rng::{Domain, StreamFactory};
use crate::PS_PER_S;

/// Length of one independently seeded block of dark counts, ps.
const DARK_BLOCK_PS: i64 = 1_000_000_000;

/// One detection record. Ordering is by time, then channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    pub t_ps: i64,
    pub channel: u16,
}

impl TimeTag {
    pub fn new(channel: u16, t_ps: i64) -> Self {
        Self { t_ps, channel }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagStream {
    pub channel_count: u16,
    pub duration_ps: i64,
    pub tags: Vec<TimeTag>,
    /// Seed of the run that produced the stream; not persisted in tag files.
    pub seed: Option<u64>,
}

impl TagStream {
    pub fn empty(channel_count: u16, duration_ps: i64) -> Self {
        Self { channel_count, duration_ps, tags: Vec::new(), seed: None }
    }

    /// Checked constructor: tags must be sorted, on declared channels and
    /// inside `[0, duration]`.
    pub fn new(channel_count: u16, duration_ps: i64, tags: Vec<TimeTag>) -> Result<Self> {
        let s = Self { channel_count, duration_ps, tags, seed: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_ps < 0 {
            return Err(Error::Format(format!("negative duration {}", self.duration_ps)));
        }
        if !self.is_sorted() {
            return Err(Error::Precondition("tag stream is not time-ordered".into()));
        }
        if let Some(t) = self
            .tags
            .iter()
            .find(|t| t.channel >= self.channel_count || t.t_ps < 0 || t.t_ps > self.duration_ps)
        {
            return Err(Error::Format(format!(
                "tag {t:?} outside {} channels × [0, {}] ps",
                self.channel_count, self.duration_ps
            )));
        }
        Ok(())
    }

    pub fn is_sorted(&self) -> bool {
        self.tags.windows(2).all(|w| w[0] <= w[1])
    }

    fn require_sorted(&self) -> Result<()> {
        if self.is_sorted() {
            Ok(())
        } else {
            Err(Error::Precondition("tag stream is not time-ordered".into()))
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    /// Times of one channel, ascending.
    pub fn channel(&self, channel: u16) -> Vec<i64> {
        self.tags.iter().filter(|t| t.channel == channel).map(|t| t.t_ps).collect()
    }

    pub fn counts_per_channel(&self) -> Vec<u64> {
        let mut counts = vec![0u64; usize::from(self.channel_count)];
        for t in &self.tags {
            if let Some(c) = counts.get_mut(usize::from(t.channel)) {
                *c += 1;
            }
        }
        counts
    }

    pub(crate) fn sort(&mut self) {
        self.tags.par_sort_unstable();
    }
}

/// Keep a tag iff it comes at least `dead_time_ps` after the last kept tag
/// on its channel.
pub fn apply_dead_time(stream: &TagStream, dead_time_ps: i64) -> Result<TagStream> {
    let per_channel = vec![dead_time_ps; usize::from(stream.channel_count)];
    apply_dead_time_per_channel(stream, &per_channel)
}

/// [`apply_dead_time`] with a separate dead time for every channel.
pub fn apply_dead_time_per_channel(stream: &TagStream, dead_times_ps: &[i64]) -> Result<TagStream> {
    stream.require_sorted()?;
    if dead_times_ps.len() != usize::from(stream.channel_count) {
        return Err(Error::Config(format!(
            "{} dead times for {} channels",
            dead_times_ps.len(),
            stream.channel_count
        )));
    }
    if let Some(d) = dead_times_ps.iter().find(|d| **d < 0) {
        return domain(format!("dead time must be non-negative, got {d}"));
    }
    let mut last: Vec<Option<i64>> = vec![None; dead_times_ps.len()];
    let tags = stream
        .tags
        .iter()
        .filter(|tag| {
            let ch = usize::from(tag.channel);
            let keep = match last.get(ch).copied().flatten() {
                Some(prev) => tag.t_ps - prev >= dead_times_ps[ch],
                None => true,
            };
            if keep {
                if let Some(slot) = last.get_mut(ch) {
                    *slot = Some(tag.t_ps);
                }
            }
            keep
        })
        .copied()
        .collect();
    Ok(TagStream { tags, ..stream.clone_header() })
}

impl TagStream {
    fn clone_header(&self) -> TagStream {
        TagStream { channel_count: self.channel_count, duration_ps: self.duration_ps, tags: Vec::new(), seed: self.seed }
    }
}

fn dark_block(rate_hz: f64, factory: &StreamFactory, block: u64, duration_ps: i64, channel: u16) -> Vec<TimeTag> {
    let start = block as i64 * DARK_BLOCK_PS;
    // Closed interval: the last block includes t = duration.
    let end = (start + DARK_BLOCK_PS).min(duration_ps + 1);
    if end <= start {
        return Vec::new();
    }
    let mut rng = factory.stream(block);
    let mean = rate_hz * (end - start) as f64 / PS_PER_S;
    let n = Poisson::new(mean).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
    (0..n).map(|_| TimeTag::new(channel, rng.random_range(start..end))).collect()
}

/// Merge homogeneous Poisson dark counts into the stream; `rates_hz[c]` is the
/// rate on channel `c`.
pub fn add_dark_counts(stream: &TagStream, rates_hz: &[f64], seed: u64) -> Result<TagStream> {
    stream.require_sorted()?;
    if rates_hz.len() != usize::from(stream.channel_count) {
        return Err(Error::Config(format!(
            "{} dark rates for {} channels",
            rates_hz.len(),
            stream.channel_count
        )));
    }
    if let Some(r) = rates_hz.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return domain(format!("dark rate must be non-negative, got {r}"));
    }
    let blocks = (stream.duration_ps / DARK_BLOCK_PS + 1) as u64;
    let mut darks: Vec<TimeTag> = rates_hz
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > 0.0)
        .flat_map(|(ch, &rate)| {
            let ch = ch as u16;
            let factory = StreamFactory::new(seed, Domain::DarkCounts(ch));
            (0..blocks)
                .into_par_iter()
                .flat_map_iter(|b| dark_block(rate, &factory, b, stream.duration_ps, ch))
                .collect::<Vec<_>>()
        })
        .collect();
    if darks.is_empty() {
        return Ok(stream.clone());
    }
    darks.extend_from_slice(&stream.tags);
    let mut out = TagStream { tags: darks, ..stream.clone_header() };
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct WindowFiltered {
    pub stream: TagStream,
    /// The stream had no tags on the trigger channel, so nothing survived.
    pub no_triggers: bool,
}

/// Keep trigger tags and every other tag within `±half_window_ps` (inclusive)
/// of some trigger.
pub fn window_filter(stream: &TagStream, trigger_channel: u16, half_window_ps: i64) -> Result<WindowFiltered> {
    stream.require_sorted()?;
    if trigger_channel >= stream.channel_count {
        return Err(Error::Config(format!(
            "trigger channel {trigger_channel} not in a {}-channel stream",
            stream.channel_count
        )));
    }
    if half_window_ps < 0 {
        return domain("window half-width must be non-negative");
    }
    let triggers = stream.channel(trigger_channel);
    let mut j = 0;
    let tags = stream
        .tags
        .iter()
        .filter(|tag| {
            if tag.channel == trigger_channel {
                return true;
            }
            while j < triggers.len() && triggers[j] < tag.t_ps - half_window_ps {
                j += 1;
            }
            j < triggers.len() && triggers[j] <= tag.t_ps + half_window_ps
        })
        .copied()
        .collect();
    Ok(WindowFiltered { stream: TagStream { tags, ..stream.clone_header() }, no_triggers: triggers.is_empty() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream_of(channels: u16, duration: i64, raw: &[(u16, i64)]) -> TagStream {
        let mut tags: Vec<_> = raw.iter().map(|&(c, t)| TimeTag::new(c, t)).collect();
        tags.sort();
        TagStream::new(channels, duration, tags).unwrap()
    }

    #[test]
    fn dead_time_examples() {
        let s = stream_of(1, 10_000, &[(0, 0), (0, 1_000), (0, 6_000)]);
        let kept = apply_dead_time(&s, 5_000).unwrap();
        assert_eq!(kept.channel(0), vec![0, 6_000]);
        assert_eq!(apply_dead_time(&s, 0).unwrap(), s);

        let two = stream_of(2, 10_000, &[(0, 0), (1, 100), (0, 200), (1, 7_000)]);
        let kept = apply_dead_time_per_channel(&two, &[0, 5_000]).unwrap();
        assert_eq!(kept.channel(0), vec![0, 200]);
        assert_eq!(kept.channel(1), vec![100, 7_000]);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let s = TagStream {
            channel_count: 1,
            duration_ps: 10,
            tags: vec![TimeTag::new(0, 5), TimeTag::new(0, 1)],
            seed: None,
        };
        assert!(matches!(apply_dead_time(&s, 1), Err(Error::Precondition(_))));
        assert!(matches!(add_dark_counts(&s, &[0.0], 1), Err(Error::Precondition(_))));
        assert!(matches!(window_filter(&s, 0, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn dark_counts() {
        let s = stream_of(2, 1_000_000, &[(1, 10), (1, 500)]);
        assert_eq!(add_dark_counts(&s, &[0.0, 0.0], 3).unwrap(), s);

        let empty = TagStream::empty(1, 10 * 1_000_000_000_000);
        let d = add_dark_counts(&empty, &[3_000.0], 9).unwrap();
        let n = d.tags.len() as f64;
        assert!((n - 30_000.0).abs() < 3.0 * 30_000f64.sqrt(), "darks {n}");
        assert!(d.is_sorted());
        d.validate().unwrap();
        assert_eq!(d, add_dark_counts(&empty, &[3_000.0], 9).unwrap());
    }

    #[test]
    fn window_examples() {
        let s = stream_of(2, 100_000, &[(0, 10_000), (1, 9_000), (1, 11_000), (1, 11_001), (0, 50_000), (1, 70_000)]);
        let w = window_filter(&s, 0, 1_000).unwrap();
        assert!(!w.no_triggers);
        assert_eq!(w.stream.channel(1), vec![9_000, 11_000]);
        assert_eq!(w.stream.channel(0), vec![10_000, 50_000]);

        let wide = window_filter(&s, 0, 20_000).unwrap();
        assert_eq!(wide.stream, s);

        let outside = stream_of(2, 100_000, &[(0, 10_000), (1, 30_000)]);
        assert_eq!(window_filter(&outside, 0, 1_000).unwrap().stream.channel(1), Vec::<i64>::new());

        let no_trig = stream_of(2, 100, &[(1, 5)]);
        let w = window_filter(&no_trig, 0, 10).unwrap();
        assert!(w.no_triggers && w.stream.tags.is_empty());
        assert!(window_filter(&no_trig, 2, 10).is_err());
    }

    fn random_stream() -> impl Strategy<Value = TagStream> {
        prop::collection::vec((0u16..3, 0i64..50_000), 0..300).prop_map(|raw| {
            let mut tags: Vec<_> = raw.into_iter().map(|(c, t)| TimeTag::new(c, t)).collect();
            tags.sort();
            TagStream::new(3, 50_000, tags).unwrap()
        })
    }

    proptest! {
        #[test]
        fn dead_time_idempotent_and_shrinking(s in random_stream(), dead in 0i64..5_000) {
            let once = apply_dead_time(&s, dead).unwrap();
            prop_assert!(once.tags.len() <= s.tags.len());
            prop_assert!(once.is_sorted());
            prop_assert_eq!(apply_dead_time(&once, dead).unwrap(), once);
        }

        #[test]
        fn operations_preserve_order(s in random_stream(), seed in any::<u64>()) {
            let d = add_dark_counts(&s, &[1e6, 0.0, 5e5], seed).unwrap();
            prop_assert!(d.is_sorted());
            prop_assert!(d.tags.len() >= s.tags.len());
            let w = window_filter(&d, 0, 500).unwrap();
            prop_assert!(w.stream.is_sorted());
        }
    }
}
