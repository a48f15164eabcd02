//! Argument parsing and dispatch for the `tsscale` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tsscale_core::io::{self, CsvOptions};
use tsscale_core::series;
use tsscale_core::synth::{self, GeneratorSpec, SignalKind};
use tsscale_core::TimeSeries;

use crate::config::{InputSpec, PipelineConfig};
use crate::exit::{CliError, OK};
use crate::pipeline;
use crate::stages;

#[derive(Debug, Parser)]
#[command(name = "tsscale", version, about = "Scaling analysis of nonstationary time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags every subcommand accepts.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random draw; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML configuration; stage parameters come from here.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (a file for `gen`; stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// A series to read: a raw file for `ingest`, otherwise the standard
/// `timestamp,value` layout written by earlier stages.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to the file stem.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value = "value")]
    pub value_column: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    White,
    Powerlaw,
    IntegratedWhite,
    Cascade,
    TwoRegime,
    Tone,
    Ramp,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long)]
    pub n: usize,
    /// Sampling interval, minutes.
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    #[arg(long, default_value = "synthetic")]
    pub label: String,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 16)]
    pub depth: u32,
    #[arg(long, default_value_t = 0.15)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.6)]
    pub alpha_short: f64,
    #[arg(long, default_value_t = 0.9)]
    pub alpha_long: f64,
    /// Samples.
    #[arg(long, default_value_t = 100.0)]
    pub crossover: f64,
    /// Samples.
    #[arg(long, default_value_t = 1440.0)]
    pub period: f64,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub slope: f64,
}

impl GenArgs {
    fn kind(&self) -> SignalKind {
        match self.kind {
            Kind::White => SignalKind::White,
            Kind::Powerlaw => SignalKind::Powerlaw { beta: self.beta },
            Kind::IntegratedWhite => SignalKind::IntegratedWhite,
            Kind::Cascade => SignalKind::Cascade {
                depth: self.depth,
                sigma: self.sigma,
            },
            Kind::TwoRegime => SignalKind::TwoRegime {
                alpha_short: self.alpha_short,
                alpha_long: self.alpha_long,
                crossover: self.crossover,
            },
            Kind::Tone => SignalKind::Tone {
                period: self.period,
                amplitude: self.amplitude,
            },
            Kind::Ramp => SignalKind::Ramp { slope: self.slope },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DfaArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Analyse the magnitude and sign of the increments instead of the
    /// series itself.
    #[arg(long)]
    pub magsign: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic series with known scaling.
    Gen {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: GenArgs,
    },
    /// Load a CSV, check its sampling and resample it.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Log-frequency power spectrum and its power-law exponent.
    Psd {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Fit Weibull, Gamma and GEV and rank them by KL divergence.
    Distfit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Singular spectrum analysis trend removal.
    Ssa {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Detrended fluctuation analysis.
    Dfa {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: DfaArgs,
    },
    /// Magnitude and sign of the increments.
    Magsign {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Phase-randomized surrogate test of the magnitude and sign exponents.
    Surrogate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Every stage for every configured input, plus the report.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig, CliError> {
    let cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.validate_stages()?;
    Ok(cfg)
}

fn seed(common: &Common, cfg: &PipelineConfig) -> u64 {
    common.seed.unwrap_or(cfg.seed)
}

fn label_of(input: &InputArgs) -> String {
    input.label.clone().unwrap_or_else(|| {
        input
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "series".into())
    })
}

fn output_dir(common: &Common, cfg: &PipelineConfig) -> Result<PathBuf, CliError> {
    let dir = common.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Reads a series in the standard layout, as written by `ingest` or `ssa`.
fn load_series(input: &InputArgs) -> Result<TimeSeries, CliError> {
    let label = label_of(input);
    let opts = CsvOptions {
        value_column: input.value_column.clone(),
        label: Some(label.clone()),
        ..CsvOptions::default()
    };
    io::load_csv(&input.input, &opts)
        .map(|l| l.series)
        .map_err(|e| CliError::stage("ingest", &label, e))
}

fn gen(common: &Common, args: &GenArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let spec = GeneratorSpec {
        dt: args.dt,
        ..GeneratorSpec::new(args.kind(), args.n, seed(common, &cfg))
    };
    let mut ts = synth::generate(&spec).map_err(|e| CliError::config(format!("invalid generator: {e}")))?;
    ts.label = args.label.clone();
    match &common.output {
        Some(path) => io::write_series_csv(path, &ts).map_err(CliError::output),
        None => {
            print!("{}", io::series_csv(&ts));
            Ok(())
        }
    }
}

fn dfa(common: &Common, args: &DfaArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let ts = load_series(&args.input)?;
    let dir = output_dir(common, &cfg)?;
    if args.magsign {
        let inc = series::increments(&ts).map_err(|e| CliError::stage("dfa", &ts.label, e))?;
        stages::dfa_magsign(&inc, &cfg, &dir)?;
    } else {
        stages::dfa_series(&ts, &cfg, &dir)?;
    }
    Ok(())
}

fn with_series(
    common: &Common,
    input: &InputArgs,
    run: impl FnOnce(&TimeSeries, &PipelineConfig, u64, &Path) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let ts = load_series(input)?;
    let dir = output_dir(common, &cfg)?;
    run(&ts, &cfg, seed(common, &cfg), &dir)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { common, args } => gen(&common, &args),
        Command::Ingest { common, input } => {
            let cfg = load_config(&common)?;
            let spec = InputSpec {
                path: input.input.clone(),
                value_column: input.value_column.clone(),
                label: label_of(&input),
            };
            let dir = output_dir(&common, &cfg)?;
            stages::ingest(&spec, &cfg, &dir).map(|_| ())
        }
        Command::Psd { common, input } => with_series(&common, &input, |ts, cfg, _, dir| {
            stages::psd(ts, cfg, dir).map(|_| ())
        }),
        Command::Distfit { common, input } => with_series(&common, &input, |ts, cfg, _, dir| {
            stages::distfit(ts, cfg, dir).map(|_| ())
        }),
        Command::Ssa { common, input } => with_series(&common, &input, |ts, cfg, _, dir| {
            stages::ssa(ts, cfg, dir).map(|_| ())
        }),
        Command::Dfa { common, args } => dfa(&common, &args),
        Command::Magsign { common, input } => with_series(&common, &input, |ts, _, _, dir| {
            stages::magsign(ts, dir).map(|_| ())
        }),
        Command::Surrogate { common, input } => with_series(&common, &input, |ts, cfg, seed, dir| {
            let inc = series::increments(ts).map_err(|e| CliError::stage("surrogate", &ts.label, e))?;
            stages::surrogates(&inc, cfg, cfg.surrogate_seed(seed), dir).map(|_| ())
        }),
        Command::Pipeline { common } => {
            let Some(path) = &common.config else {
                return Err(CliError::config("pipeline needs --config"));
            };
            let mut cfg = PipelineConfig::load(path)?;
            if let Some(out) = &common.output {
                cfg.output_dir = out.clone();
            }
            let seed = seed(&common, &cfg);
            pipeline::run_pipeline(&cfg, seed).map(|_| ())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code,
/// printing any error to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { crate::exit::CONFIG } else { OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => OK,
        Err(e) => {
            eprintln!("tsscale: {e}");
            e.code
        }
    }
}
