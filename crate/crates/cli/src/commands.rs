use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use inline_snspd::bicwave::{bic_widths, propagation_loss};
use inline_snspd::correlator::{conditional_g2, g2_normalized, start_stop_histogram, CorrelationResult, Histogram};
use inline_snspd::fitkit::{fwhm_of, nls_fit, FitModel, ModelKind};
use inline_snspd::pnr::{click_pattern_probs, estimate_nbar, tally_triggers, ClickStatistics};
use inline_snspd::rng::derive_seed;
use inline_snspd::simkernel::{read_tag_file, simulate as run_simulation, write_tag_file, TagFormat, TagStream};
use inline_snspd::sources::SourceSpec;

use crate::config::{ConfigError, ToolkitConfig};

fn sink(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn design(cfg: &ToolkitConfig, out: Option<&Path>) -> anyhow::Result<()> {
    let cascade = cfg.cascade()?;
    let mut w = sink(out)?;
    writeln!(w, "wire,length_um,conditional_absorption,input_fraction,cumulative_absorption")?;
    let cumulative = cascade.cumulative_absorption();
    for (k, wire) in cascade.wires.iter().enumerate() {
        writeln!(
            w,
            "{},{:.4},{:.6},{:.6},{:.6}",
            k + 1,
            wire.length_um,
            cascade.conditional[k],
            cascade.input_fractions[k],
            cumulative[k]
        )?;
    }
    w.flush()?;

    let params = cfg.waveguide.params();
    let w_bic = params.bic_width();
    eprintln!(
        "{} wires, total length {:.3} µm, residual transmission {:.4}{}",
        cascade.len(),
        cascade.total_length_um(),
        cascade.residual,
        if cascade.capped { " (last wire capped)" } else { "" }
    );
    let widths: Vec<String> = bic_widths(&params, 0.1, 5.0)?.iter().map(|b| format!("{b:.4}")).collect();
    eprintln!(
        "waveguide: BIC widths [{}] µm; loss at 1.05·w_bic = {:.3} dB/cm",
        widths.join(", "),
        propagation_loss(1.05 * w_bic, &params, cfg.waveguide.residual_loss_db_per_cm)?
    );
    Ok(())
}

pub fn simulate(cfg: &ToolkitConfig, out: &Path, format: TagFormat) -> anyhow::Result<()> {
    let cascade = cfg.cascade()?;
    let stream = run_simulation(&cfg.source, &cascade, &cfg.run)?;
    write_tag_file(&stream, out, format).with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "seed {}: {} tags over {} ps, per channel {:?}",
        cfg.run.seed,
        stream.tags.len(),
        stream.duration_ps,
        stream.counts_per_channel()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct CorrelateArgs {
    /// Tag file (binary or CSV)
    pub tags: PathBuf,
    /// Heralded g_c²(τ) of s1/s2 conditioned on the idler.
    #[arg(long)]
    pub conditional: bool,
    /// Start-stop histogram of b after a instead of g².
    #[arg(long, conflicts_with = "conditional")]
    pub histogram: bool,
    /// First channel of g² or the start channel of --histogram
    #[arg(long)]
    pub a: Option<u16>,
    /// Second channel of g² or the stop channel
    #[arg(long)]
    pub b: Option<u16>,
    /// Herald channel; the aux channel by default
    #[arg(long)]
    pub idler: Option<u16>,
    /// Signal channel at zero delay; the first wire by default
    #[arg(long)]
    pub s1: Option<u16>,
    /// Signal channel at delay τ; the second wire by default
    #[arg(long)]
    pub s2: Option<u16>,
    /// Bin width; `analysis.w_bin_ps` (or `jitter_bin_ps` for histograms) by default.
    #[arg(long)]
    pub bin_ps: Option<i64>,
}

fn channel_tags(stream: &TagStream, channel: Option<u16>, role: &str) -> anyhow::Result<Vec<i64>> {
    let Some(ch) = channel else {
        bail!("no channel for {role}: pass it explicitly or configure run.aux_channel and at least two wires");
    };
    if ch >= stream.channel_count {
        bail!("{role} channel {ch} not present: the stream has {} channels", stream.channel_count);
    }
    Ok(stream.channel(ch))
}

fn write_correlation(w: &mut dyn Write, r: &CorrelationResult) -> anyhow::Result<()> {
    writeln!(w, "tau_ps,value,rel_uncertainty")?;
    for ((tau, v), u) in r.taus_ps.iter().zip(&r.values).zip(&r.rel_uncertainties) {
        match v {
            Some(v) => writeln!(w, "{tau},{v},{u}")?,
            None => writeln!(w, "{tau},nan,{u}")?,
        }
    }
    Ok(())
}

fn write_histogram(w: &mut dyn Write, h: &Histogram) -> anyhow::Result<()> {
    writeln!(w, "bin_start_ps,count")?;
    for (s, c) in h.bin_starts().iter().zip(&h.counts) {
        writeln!(w, "{s},{c}")?;
    }
    Ok(())
}

pub fn correlate(cfg: &ToolkitConfig, args: &CorrelateArgs, out: Option<&Path>) -> anyhow::Result<()> {
    let stream = read_tag_file(&args.tags).with_context(|| format!("reading {}", args.tags.display()))?;
    let layout = cfg.layout()?;
    let wire = |i: usize| layout.wires.get(i).copied();
    let a = &cfg.analysis;
    let mut w = sink(out)?;
    if args.conditional {
        let idler = channel_tags(&stream, args.idler.or(layout.aux), "idler")?;
        let s1 = channel_tags(&stream, args.s1.or(wire(0)), "s1")?;
        let s2 = channel_tags(&stream, args.s2.or(wire(1)), "s2")?;
        let mut g = a.g2();
        if let Some(bin) = args.bin_ps {
            g.w_bin_ps = bin;
        }
        write_correlation(&mut w, &conditional_g2(&idler, &s1, &s2, &g)?)?;
    } else if args.histogram {
        let starts = channel_tags(&stream, args.a.or(layout.aux), "start")?;
        let stops = channel_tags(&stream, args.b.or(wire(0)), "stop")?;
        let h = start_stop_histogram(
            &starts,
            &stops,
            args.bin_ps.unwrap_or(a.jitter_bin_ps),
            a.jitter_t_min_ps,
            a.jitter_t_max_ps,
        )?;
        write_histogram(&mut w, &h)?;
    } else {
        let ta = channel_tags(&stream, args.a.or(wire(0)), "a")?;
        let tb = channel_tags(&stream, args.b.or(wire(1)), "b")?;
        let r = g2_normalized(&ta, &tb, args.bin_ps.unwrap_or(a.w_bin_ps), a.tau_range_ps, stream.duration_ps)?;
        write_correlation(&mut w, &r)?;
    }
    w.flush()?;
    Ok(())
}

fn pnr_header(w: &mut dyn Write, wires: usize) -> anyhow::Result<()> {
    let sim: Vec<String> = (0..=wires).map(|k| format!("P{k}")).collect();
    let theory: Vec<String> = (0..=wires).map(|k| format!("P{k}_theory")).collect();
    writeln!(w, "nbar,{},{}", sim.join(","), theory.join(","))?;
    Ok(())
}

fn pnr_row(w: &mut dyn Write, nbar: f64, sim: &ClickStatistics, theory: &ClickStatistics) -> anyhow::Result<()> {
    let n = theory.p.len();
    let cols: Vec<String> = (0..n).map(|k| sim.get(k).to_string()).chain(theory.p.iter().map(f64::to_string)).collect();
    writeln!(w, "{nbar},{}", cols.join(","))?;
    Ok(())
}

fn trigger_channel(cfg: &ToolkitConfig) -> anyhow::Result<u16> {
    cfg.run
        .aux_channel
        .ok_or_else(|| ConfigError::new("run", "click statistics need a trigger channel (aux_channel)").into())
}

/// Coherent-light sweep: one simulated run per n̄ on a log grid.
pub fn pnr_sweep(cfg: &ToolkitConfig, out: Option<&Path>) -> anyhow::Result<()> {
    let trigger = trigger_channel(cfg)?;
    let base = cfg.cascade()?;
    let layout = cfg.layout()?;
    let rep = cfg.source.rep_rate_hz().unwrap_or(50e6);
    let a = &cfg.analysis;
    let mut w = sink(out)?;
    pnr_header(&mut w, base.len())?;
    for k in 0..a.pnr_points {
        let nbar = if a.pnr_points == 1 {
            a.pnr_nbar_min
        } else {
            a.pnr_nbar_min * (a.pnr_nbar_max / a.pnr_nbar_min).powf(k as f64 / (a.pnr_points - 1) as f64)
        };
        let mut cascade = base.clone();
        for wire in &mut cascade.wires {
            wire.eta_int /= 1.0 + a.pnr_rolloff * nbar;
        }
        let source = SourceSpec::CoherentPulsed { nbar, rep_rate_hz: rep };
        let run = inline_snspd::simkernel::RunConfig { seed: derive_seed(cfg.run.seed, k as u64), ..cfg.run };
        let stream = run_simulation(&source, &cascade, &run)?;
        let tally = tally_triggers(&stream, trigger, &layout.wires, a.trigger_half_window_ps)?;
        let theory = click_pattern_probs(nbar, &cascade.detection_efficiencies())?;
        pnr_row(&mut w, nbar, &tally.statistics(), &theory)?;
    }
    w.flush()?;
    Ok(())
}

pub fn analyze_pnr(cfg: &ToolkitConfig, tags: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let stream = read_tag_file(tags).with_context(|| format!("reading {}", tags.display()))?;
    let trigger = trigger_channel(cfg)?;
    let cascade = cfg.cascade()?;
    let layout = cfg.layout()?;
    if stream.channel_count != layout.channel_count {
        bail!(
            "{} has {} channels but the configured layout has {}",
            tags.display(),
            stream.channel_count,
            layout.channel_count
        );
    }
    let tally = tally_triggers(&stream, trigger, &layout.wires, cfg.analysis.trigger_half_window_ps)?;
    let sim = tally.statistics();
    let etas = cascade.detection_efficiencies();
    let nbar = estimate_nbar(sim.get(0), &etas)?;
    let theory = click_pattern_probs(nbar, &etas)?;
    let mut w = sink(out)?;
    pnr_header(&mut w, cascade.len())?;
    pnr_row(&mut w, nbar, &sim, &theory)?;
    w.flush()?;
    Ok(())
}

pub fn analyze_jitter(cfg: &ToolkitConfig, tags: &Path, channel: Option<u16>, out: Option<&Path>) -> anyhow::Result<()> {
    let stream = read_tag_file(tags).with_context(|| format!("reading {}", tags.display()))?;
    let layout = cfg.layout()?;
    let starts = channel_tags(&stream, layout.aux, "trigger")?;
    let stops = channel_tags(&stream, channel.or(layout.wires.first().copied()), "wire")?;
    let a = &cfg.analysis;
    let h = start_stop_histogram(&starts, &stops, a.jitter_bin_ps, a.jitter_t_min_ps, a.jitter_t_max_ps)?;
    let x = h.bin_centers();
    let y: Vec<f64> = h.counts.iter().map(|c| *c as f64).collect();
    let model = FitModel::new(ModelKind::Gaussian);
    let fit = nls_fit(&model, &x, &y, &model.initial_guess(&x, &y))?;
    if !fit.converged {
        bail!("Gaussian fit to the jitter histogram did not converge");
    }
    if let Some(p) = out {
        let mut w = sink(Some(p))?;
        write_histogram(&mut w, &h)?;
        w.flush()?;
    }
    println!("starts={}", h.total_starts);
    println!("histogrammed={}", h.total());
    println!("mu_ps={}", fit.parameters[1]);
    println!("fwhm_ps={}", fwhm_of(&model, &fit.parameters)?);
    Ok(())
}

fn read_xy(path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            bail!("{}: line {} needs two columns", path.display(), i + 1);
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                x.push(a);
                y.push(b);
            }
            _ if i == 0 => {} // header
            _ => bail!("{}: line {} is not numeric", path.display(), i + 1),
        }
    }
    Ok((x, y))
}

pub fn fit(model: &str, data: &Path, length_um: f64, out: Option<&Path>) -> anyhow::Result<()> {
    let mut kind: ModelKind = model.parse()?;
    if let ModelKind::Sinc2Transmission { length_um: l } = &mut kind {
        *l = length_um;
    }
    let (x, y) = read_xy(data)?;
    let model = FitModel::new(kind);
    let fit = nls_fit(&model, &x, &y, &model.initial_guess(&x, &y))?;
    let mut w = sink(out)?;
    writeln!(w, "model={}", kind.name())?;
    writeln!(w, "converged={}", fit.converged)?;
    writeln!(w, "iterations={}", fit.iterations)?;
    writeln!(w, "residual_rms={}", fit.residual_rms)?;
    let se = fit.standard_errors();
    for (i, name) in model.names.iter().enumerate() {
        writeln!(w, "{name}={}", fit.parameters[i])?;
        if let Some(se) = &se {
            writeln!(w, "{name}_stderr={}", se[i])?;
        }
    }
    if let Some(cov) = &fit.covariance {
        for (i, a) in model.names.iter().enumerate() {
            for (j, b) in model.names.iter().enumerate() {
                writeln!(w, "cov_{a}_{b}={}", cov[(i, j)])?;
            }
        }
    }
    if let Ok(fwhm) = fwhm_of(&model, &fit.parameters) {
        writeln!(w, "fwhm={fwhm}")?;
    }
    w.flush()?;
    Ok(())
}
