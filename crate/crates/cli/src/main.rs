//! Command-line front end: cascade design, tag-stream simulation and the
//! analysis chain, all driven by one TOML config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inline_snspd::simkernel::TagFormat;

use crate::config::{ConfigError, ToolkitConfig};

#[derive(Parser, Debug)]
#[command(name = "inline-snspd", version, about = "Inline SNSPD cascade design, simulation and analysis")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// TOML config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; CSV results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tag file format written by `simulate`.
    #[arg(long, global = true, value_enum, default_value_t = Format::Binary)]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Binary,
}

impl From<Format> for TagFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TagFormat::Csv,
            Format::Binary => TagFormat::Binary,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Wire table of the configured cascade.
    Design {
        /// Equal split over N wires (overrides the config).
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated input fractions (overrides the config).
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
    /// Simulate the configured run and write a tag file to --out.
    Simulate,
    /// Correlate channels of a tag file.
    Correlate(commands::CorrelateArgs),
    /// Sweep n̄ over a log grid: simulated and closed-form click probabilities.
    Pnr,
    /// Fit a model to a two-column `x,y` CSV.
    Fit {
        /// sinc2_transmission | line | exp_decay | gaussian | exgaussian
        model: String,
        /// Two-column `x,y` CSV
        data: PathBuf,
        /// Waveguide length for sinc2_transmission, µm.
        #[arg(long, default_value_t = 1000.0)]
        length_um: f64,
    },
    /// Print the default config profile.
    Defaults,
    /// Analysis recipes over existing tag files.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// Same as the top-level `correlate`.
    Correlate(commands::CorrelateArgs),
    /// Click statistics of a pulsed run around its triggers.
    Pnr {
        /// Tag file of a pulsed run
        tags: PathBuf,
    },
    /// System jitter from the trigger-to-click histogram.
    Jitter {
        /// Tag file of a pulsed run
        tags: PathBuf,
        /// Wire channel; the first wire by default.
        #[arg(long)]
        channel: Option<u16>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if matches!(cli.command, Command::Defaults) {
        print!("{}", config::DEFAULTS_TOML);
        return Ok(());
    }
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = ToolkitConfig::load(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        cfg.run.seed = seed;
    }
    let g = &cli.global;
    match cli.command {
        Command::Design { n, fractions } => {
            if n.is_some() || fractions.is_some() {
                cfg.cascade.n = n;
                cfg.cascade.fractions = fractions;
            }
            cfg.validate()?;
            commands::design(&cfg, g.out.as_deref())
        }
        Command::Simulate => {
            let out = g.out.as_deref().ok_or_else(|| ConfigError::new("", "simulate needs --out"))?;
            commands::simulate(&cfg, out, g.format.into())
        }
        Command::Correlate(args) | Command::Analyze(AnalyzeCommand::Correlate(args)) => {
            commands::correlate(&cfg, &args, g.out.as_deref())
        }
        Command::Defaults => Ok(()),
        Command::Pnr => commands::pnr_sweep(&cfg, g.out.as_deref()),
        Command::Fit { model, data, length_um } => commands::fit(&model, &data, length_um, g.out.as_deref()),
        Command::Analyze(AnalyzeCommand::Pnr { tags }) => commands::analyze_pnr(&cfg, &tags, g.out.as_deref()),
        Command::Analyze(AnalyzeCommand::Jitter { tags, channel }) => {
            commands::analyze_jitter(&cfg, &tags, channel, g.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some()
                || matches!(e.downcast_ref::<inline_snspd::Error>(), Some(inline_snspd::Error::Config(_)))
            {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
