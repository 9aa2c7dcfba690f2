//! Monte Carlo detection of a source by a nanowire cascade.
//!
//! Every random draw belonging to trigger `k` (pulsed) or pair block `b`
//! (CW) comes from a stream keyed by that index, so a run is a pure function
//! of its seed whatever the number of worker threads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stream::{add_dark_counts, apply_dead_time_per_channel, TagStream, TimeTag};
use crate::cascade::CascadeDesign;
use crate::error::{Error, Result};
use crate::rng::{Domain, StreamFactory};
use crate::sources::{draw_pulse_photons, duration_to_ps, spdc_block, trigger_time_ps, SourceSpec, PAIR_BLOCK_PS};
use crate::{FWHM_PER_SIGMA, PS_PER_S};

/// Trigger count used when a run specifies neither a duration nor a count.
pub const DEFAULT_TRIGGERS: u64 = 1_000_000;
const SHARD: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub duration_s: Option<f64>,
    pub n_triggers: Option<u64>,
    /// Channel of the laser trigger (pulsed) or herald (SPDC) tags.
    pub aux_channel: Option<u16>,
    /// Jitter of the recorded trigger edge.
    pub trigger_jitter_fwhm_ps: f64,
    /// Amplifier/time-tagger jitter added to every nanowire click.
    pub readout_jitter_fwhm_ps: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: None,
            n_triggers: None,
            aux_channel: Some(0),
            trigger_jitter_fwhm_ps: 4.5,
            readout_jitter_fwhm_ps: 29.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunExtent {
    Duration(f64),
    Triggers(u64),
}

impl RunConfig {
    pub fn with_triggers(seed: u64, n: u64) -> Self {
        Self { seed, n_triggers: Some(n), ..Self::default() }
    }

    pub fn with_duration(seed: u64, duration_s: f64) -> Self {
        Self { seed, duration_s: Some(duration_s), ..Self::default() }
    }

    pub fn extent(&self) -> Result<RunExtent> {
        match (self.duration_s, self.n_triggers) {
            (Some(_), Some(_)) => Err(Error::Config("run: set either duration_s or n_triggers, not both".into())),
            (Some(d), None) => Ok(RunExtent::Duration(d)),
            (None, Some(n)) => Ok(RunExtent::Triggers(n)),
            (None, None) => Ok(RunExtent::Triggers(DEFAULT_TRIGGERS)),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.trigger_jitter_fwhm_ps >= 0.0 && self.readout_jitter_fwhm_ps >= 0.0;
        if !ok {
            return Err(Error::Config("run: jitters must be non-negative".into()));
        }
        Ok(())
    }
}

/// Assignment of channel ids: the auxiliary channel keeps its id, wires take
/// the remaining ids `0..=n` in optical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLayout {
    pub channel_count: u16,
    pub aux: Option<u16>,
    pub wires: Vec<u16>,
}

impl ChannelLayout {
    pub fn new(n_wires: usize, aux: Option<u16>) -> Result<Self> {
        let total = n_wires + usize::from(aux.is_some());
        let channel_count = u16::try_from(total)
            .map_err(|_| Error::Config(format!("{total} channels exceed the 16-bit channel id range")))?;
        if let Some(a) = aux {
            if usize::from(a) > n_wires {
                return Err(Error::Config(format!(
                    "auxiliary channel {a} outside 0..={n_wires} for a {n_wires}-wire cascade"
                )));
            }
        }
        let wires = (0..channel_count).filter(|c| Some(*c) != aux).collect();
        Ok(Self { channel_count, aux, wires })
    }
}

struct Detector {
    conditional: Vec<f64>,
    eta: Vec<f64>,
    jitter: Vec<Normal<f64>>,
    channels: Vec<u16>,
}

impl Detector {
    fn new(cascade: &CascadeDesign, layout: &ChannelLayout, readout_fwhm: f64) -> Self {
        let jitter = cascade
            .wires
            .iter()
            .map(|w| {
                let sigma = (w.jitter_fwhm_ps.powi(2) + readout_fwhm.powi(2)).sqrt() / FWHM_PER_SIGMA;
                Normal::new(0.0, sigma).expect("non-negative jitter")
            })
            .collect();
        Self {
            conditional: cascade.conditional.clone(),
            eta: cascade.wires.iter().map(|w| w.eta_int).collect(),
            jitter,
            channels: layout.wires.clone(),
        }
    }

    /// One photon arriving at `t_ps`: walk the cascade until it is absorbed
    /// or leaves past the last wire.
    fn photon(&self, t_ps: i64, rng: &mut ChaCha8Rng, out: &mut Vec<TimeTag>) {
        for (k, &a) in self.conditional.iter().enumerate() {
            if rng.random::<f64>() < a {
                if rng.random::<f64>() < self.eta[k] {
                    let t = t_ps as f64 + self.jitter[k].sample(rng);
                    out.push(TimeTag::new(self.channels[k], t.round() as i64));
                }
                return;
            }
        }
    }
}

fn check_cascade(cascade: &CascadeDesign) -> Result<()> {
    if cascade.conditional.len() != cascade.wires.len() {
        return Err(Error::Config(format!(
            "cascade has {} wires but {} absorption values",
            cascade.wires.len(),
            cascade.conditional.len()
        )));
    }
    for w in &cascade.wires {
        w.validate()?;
    }
    if let Some(a) = cascade.conditional.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Domain(format!("conditional absorption {a} outside [0, 1]")));
    }
    Ok(())
}

fn pulsed_tags(
    source: &SourceSpec,
    detector: &Detector,
    run: &RunConfig,
    aux: Option<u16>,
    n_triggers: u64,
    period_ps: f64,
) -> Vec<TimeTag> {
    let photons = StreamFactory::new(run.seed, Domain::SourcePulses);
    let detection = StreamFactory::new(run.seed, Domain::Detection);
    let trig_jitter = Normal::new(0.0, run.trigger_jitter_fwhm_ps / FWHM_PER_SIGMA).expect("validated");
    let rep = PS_PER_S / period_ps;
    let half = (period_ps / 2.0).round() as i64;
    let shards = n_triggers.div_ceil(SHARD);
    (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut out = Vec::new();
            for k in s * SHARD..((s + 1) * SHARD).min(n_triggers) {
                // Pulses sit in the middle of their trigger slot.
                let t = trigger_time_ps(k, rep) + half;
                let mut rng = detection.stream(k);
                if let Some(ch) = aux {
                    let tt = t as f64 + trig_jitter.sample(&mut rng);
                    out.push(TimeTag::new(ch, tt.round() as i64));
                }
                for _ in 0..draw_pulse_photons(source, &photons, k) {
                    detector.photon(t, &mut rng, &mut out);
                }
            }
            out
        })
        .collect()
}

fn spdc_tags(source: &SourceSpec, detector: &Detector, run: &RunConfig, aux: Option<u16>, duration_ps: i64) -> Vec<TimeTag> {
    let pairs = StreamFactory::new(run.seed, Domain::SourcePairs);
    let detection = StreamFactory::new(run.seed, Domain::Detection);
    let blocks = (duration_ps + PAIR_BLOCK_PS - 1) / PAIR_BLOCK_PS;
    (0..blocks as u64)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = detection.stream(b);
            let mut out = Vec::new();
            for pair in spdc_block(source, &pairs, b, duration_ps) {
                if let (Some(ch), Some(h)) = (aux, pair.herald_ps) {
                    out.push(TimeTag::new(ch, h));
                }
                if pair.signal {
                    detector.photon(pair.time_ps, &mut rng, &mut out);
                }
            }
            out
        })
        .collect()
}

/// A zero-length run is allowed and records nothing.
fn run_duration_ps(duration_s: f64) -> Result<i64> {
    if duration_s == 0.0 {
        Ok(0)
    } else {
        duration_to_ps(duration_s)
    }
}

/// Simulate a run and return the recorded time tags.
///
/// Physical clicks are generated first; dark counts are then merged in and the
/// per-wire dead time applied to the combined stream. Tags pushed outside
/// `[0, duration]` by jitter are dropped.
pub fn simulate(source: &SourceSpec, cascade: &CascadeDesign, run: &RunConfig) -> Result<TagStream> {
    source.validate()?;
    check_cascade(cascade)?;
    run.validate()?;
    let layout = ChannelLayout::new(cascade.len(), run.aux_channel)?;
    let detector = Detector::new(cascade, &layout, run.readout_jitter_fwhm_ps);

    let (raw, duration_ps) = match (source.rep_rate_hz(), run.extent()?) {
        (Some(rep), extent) => {
            let period_ps = PS_PER_S / rep;
            let n = match extent {
                RunExtent::Triggers(n) => n,
                RunExtent::Duration(d) => (run_duration_ps(d)? as f64 / period_ps).floor() as u64,
            };
            let duration_ps = (n as f64 * period_ps).round() as i64;
            (pulsed_tags(source, &detector, run, layout.aux, n, period_ps), duration_ps)
        }
        (None, RunExtent::Duration(d)) => {
            let duration_ps = run_duration_ps(d)?;
            (spdc_tags(source, &detector, run, layout.aux, duration_ps), duration_ps)
        }
        (None, RunExtent::Triggers(_)) => {
            return Err(Error::Config("run: a CW source needs duration_s, not n_triggers".into()));
        }
    };

    let tags = raw.into_iter().filter(|t| (0..=duration_ps).contains(&t.t_ps)).collect();
    let mut stream = TagStream { channel_count: layout.channel_count, duration_ps, tags, seed: Some(run.seed) };
    stream.sort();

    let mut darks = vec![0.0; usize::from(layout.channel_count)];
    let mut dead = vec![0i64; usize::from(layout.channel_count)];
    for (w, &ch) in cascade.wires.iter().zip(&layout.wires) {
        darks[usize::from(ch)] = w.dark_rate_hz;
        dead[usize::from(ch)] = w.dead_time_ps.round() as i64;
    }
    let stream = add_dark_counts(&stream, &darks, run.seed)?;
    let mut stream = apply_dead_time_per_channel(&stream, &dead)?;
    stream.seed = Some(run.seed);
    Ok(stream)
}
