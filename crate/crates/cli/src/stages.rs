//! One function per analysis stage. Each computes its result and writes the
//! stage's artifacts into a directory; `pipeline` and the single-stage
//! subcommands share them so their files are identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tsscale_core::dfa::{self, FluctuationFunction, Persistence, ScalingExponent};
use tsscale_core::distfit::{self, DistfitTable, TableRow};
use tsscale_core::io::{self, LoadReport};
use tsscale_core::series::{self, IncrementSeries};
use tsscale_core::spectral::{self, SpectralFit};
use tsscale_core::ssa::{self, SsaConfig};
use tsscale_core::surrogate::{self, SurrogateReport};
use tsscale_core::{stats, TimeSeries};

use crate::config::{InputSpec, PipelineConfig};
use crate::exit::CliError;

pub const SERIES: &str = "series.csv";
pub const INGEST: &str = "ingest.json";
pub const DISTFIT: &str = "distfit.json";
pub const PSD: &str = "psd.csv";
pub const SPECTRAL: &str = "spectral.json";
pub const EIGVALS: &str = "eigvals.csv";
pub const TREND: &str = "trend.csv";
pub const RESIDUAL: &str = "residual.csv";
pub const SSA: &str = "ssa.json";
pub const MAGNITUDE: &str = "magnitude.csv";
pub const SIGN: &str = "sign.csv";
pub const FLUCT: &str = "fluct.csv";
pub const FLUCT_MAG: &str = "fluct_mag.csv";
pub const FLUCT_SIGN: &str = "fluct_sign.csv";
pub const DFA: &str = "dfa.json";
pub const SURROGATE_JSON: &str = "surrogate.json";
pub const SURROGATE_CSV: &str = "surrogate.csv";

fn out(dir: &Path, name: &str) -> std::path::PathBuf {
    dir.join(name)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    io::write_json(&out(dir, name), value).map_err(CliError::output)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSummary {
    pub label: String,
    pub source: String,
    pub load: LoadReport,
    /// Sampling interval of the file, minutes.
    pub native_dt: f64,
    /// Sampling interval after resampling, minutes.
    pub dt: f64,
    pub n: usize,
}

/// Loads one input and averages it onto the configured resolution.
/// Writes `series.csv` and `ingest.json`.
pub fn ingest(input: &InputSpec, cfg: &PipelineConfig, dir: &Path) -> Result<(TimeSeries, IngestSummary), CliError> {
    let label = input.label.as_str();
    let loaded = io::load_csv(&input.path, &cfg.csv_options(&input.value_column, label))
        .map_err(|e| CliError::stage("ingest", label, e))?;
    let native_dt = loaded.series.dt;
    let ts = match cfg.resample.window {
        Some(w) if (w - native_dt).abs() > 1e-9 * native_dt => {
            series::resample_mean(&loaded.series, w).map_err(|e| CliError::stage("resample", label, e))?
        }
        _ => loaded.series,
    };
    let summary = IngestSummary {
        label: label.to_string(),
        source: input.path.display().to_string(),
        load: loaded.report,
        native_dt,
        dt: ts.dt,
        n: ts.len(),
    };
    io::write_series_csv(&out(dir, SERIES), &ts).map_err(CliError::output)?;
    write_json(dir, INGEST, &summary)?;
    Ok((ts, summary))
}

/// Writes `distfit.json`, a one-row table.
pub fn distfit(ts: &TimeSeries, cfg: &PipelineConfig, dir: &Path) -> Result<TableRow, CliError> {
    let ranking = distfit::rank_distributions(ts, &cfg.distfit.config())
        .map_err(|e| CliError::stage("distfit", &ts.label, e))?;
    let table = DistfitTable::new(std::slice::from_ref(&ranking));
    write_json(dir, DISTFIT, &table)?;
    Ok(table.rows.into_iter().next().expect("one ranking gives one row"))
}

/// Writes `psd.csv` and `spectral.json`.
pub fn psd(ts: &TimeSeries, cfg: &PipelineConfig, dir: &Path) -> Result<SpectralFit, CliError> {
    let est = spectral::lpsd(ts, &cfg.spectral.lpsd()).map_err(|e| CliError::stage("psd", &ts.label, e))?;
    let [lo, hi] = cfg.spectral.band;
    let fit = spectral::fit_spectral_exponent(&est, lo, hi).map_err(|e| CliError::stage("psd", &ts.label, e))?;
    let mut text = String::from("frequency,power,segments\n");
    for i in 0..est.frequencies.len() {
        let _ = writeln!(
            text,
            "{},{},{}",
            io::fmt_f64(est.frequencies[i]),
            io::fmt_f64(est.power[i]),
            est.segments_per_freq[i]
        );
    }
    io::write_file(&out(dir, PSD), text.as_bytes()).map_err(CliError::output)?;
    write_json(dir, SPECTRAL, &fit)?;
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    fn of(x: &[f64]) -> Self {
        Self {
            mean: stats::mean(x),
            std: stats::std_dev(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsaSummary {
    pub window: usize,
    pub exponent: f64,
    pub centered: bool,
    pub trend_components: Vec<usize>,
    /// Leading variance fractions (up to ten).
    pub variance_fractions_head: Vec<f64>,
    pub trend_variance_fraction: f64,
    pub clamped_eigenvalues: usize,
    pub most_negative_eigenvalue: f64,
    pub trend: Moments,
    pub residual: Moments,
}

/// Writes `eigvals.csv`, `trend.csv`, `residual.csv` and `ssa.json`; returns
/// trend and residual.
pub fn ssa(ts: &TimeSeries, cfg: &PipelineConfig, dir: &Path) -> Result<(TimeSeries, TimeSeries, SsaSummary), CliError> {
    let fail = |e| CliError::stage("ssa", &ts.label, e);
    let s = &cfg.ssa;
    let mut sc = match s.window {
        Some(m) => SsaConfig {
            exponent: s.exponent,
            ..SsaConfig::with_window(m)
        },
        None => SsaConfig::for_length(ts.len(), s.exponent).map_err(fail)?,
    };
    sc.centered = s.centered;
    let needed = s.trend.iter().copied().max().unwrap_or(1);
    if needed > sc.window {
        return Err(CliError::config(format!(
            "ssa.trend selects component {needed} but the window has only {}",
            sc.window
        )));
    }
    sc.components = Some(needed);
    let dec = ssa::decompose(ts, &sc).map_err(fail)?;
    let split = ssa::split_trend(&dec, &s.trend, ts).map_err(fail)?;

    let k: Vec<f64> = (1..=dec.window).map(|k| k as f64).collect();
    let mut text = String::from("k,eigenvalue,variance_fraction\n");
    for i in 0..dec.window {
        let _ = writeln!(
            text,
            "{},{},{}",
            k[i] as usize,
            io::fmt_f64(dec.eigenvalues[i]),
            io::fmt_f64(dec.variance_fractions[i])
        );
    }
    io::write_file(&out(dir, EIGVALS), text.as_bytes()).map_err(CliError::output)?;
    io::write_series_csv(&out(dir, TREND), &split.trend).map_err(CliError::output)?;
    io::write_series_csv(&out(dir, RESIDUAL), &split.residual).map_err(CliError::output)?;

    let summary = SsaSummary {
        window: dec.window,
        exponent: s.exponent,
        centered: dec.centered,
        trend_components: split.selected.clone(),
        variance_fractions_head: dec.variance_fractions.iter().take(10).copied().collect(),
        trend_variance_fraction: split.selected.iter().map(|&k| dec.variance_fractions[k - 1]).sum(),
        clamped_eigenvalues: dec.clamped,
        most_negative_eigenvalue: dec.most_negative,
        trend: Moments::of(&split.trend.values),
        residual: Moments::of(&split.residual.values),
    };
    write_json(dir, SSA, &summary)?;
    Ok((split.trend, split.residual, summary))
}

/// Writes `magnitude.csv` and `sign.csv` for the increments of `ts`.
pub fn magsign(ts: &TimeSeries, dir: &Path) -> Result<IncrementSeries, CliError> {
    let inc = series::increments(ts).map_err(|e| CliError::stage("magsign", &ts.label, e))?;
    let pair = series::mag_sign(&inc);
    io::write_columns_csv(&out(dir, MAGNITUDE), &["magnitude"], &[&pair.magnitude]).map_err(CliError::output)?;
    let mut text = String::from("sign\n");
    for s in &pair.sign {
        let _ = writeln!(text, "{s}");
    }
    io::write_file(&out(dir, SIGN), text.as_bytes()).map_err(CliError::output)?;
    Ok(inc)
}

pub fn box_grid(n: usize, dt: f64, cfg: &PipelineConfig, label: &str) -> Result<Vec<usize>, CliError> {
    dfa::default_box_grid(n, dt, cfg.dfa.t_min, cfg.dfa.points_per_decade)
        .map_err(|e| CliError::stage("dfa", label, e))
}

fn write_fluct(dir: &Path, name: &str, f: &FluctuationFunction) -> Result<(), CliError> {
    io::write_columns_csv(&out(dir, name), &["n_minutes", "F"], &[&f.box_minutes(), &f.fluctuation])
        .map_err(CliError::output)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowExponents {
    pub magnitude: ScalingExponent,
    pub magnitude_persistence: Persistence,
    pub sign: ScalingExponent,
    pub sign_persistence: Persistence,
}

impl WindowExponents {
    fn new(magnitude: ScalingExponent, sign: ScalingExponent) -> Self {
        Self {
            magnitude,
            magnitude_persistence: magnitude.persistence(),
            sign,
            sign_persistence: sign.persistence(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagSignDfa {
    pub order: usize,
    pub n_box_sizes: usize,
    pub low: WindowExponents,
    pub high: WindowExponents,
}

/// DFA of the magnitude and sign series of `inc`. Writes `fluct_mag.csv`,
/// `fluct_sign.csv` and `dfa.json`.
pub fn dfa_magsign(inc: &IncrementSeries, cfg: &PipelineConfig, dir: &Path) -> Result<MagSignDfa, CliError> {
    let label = inc.parent_label.as_str();
    let fail = |e| CliError::stage("dfa", label, e);
    let grid = box_grid(inc.len(), inc.dt, cfg, label)?;
    let pair = series::mag_sign(inc);
    let order = cfg.dfa.order;
    let fm = dfa::dfa(&pair.magnitude, order, &grid, inc.dt).map_err(fail)?;
    let fs = dfa::dfa(&pair.sign_as_f64(), order, &grid, inc.dt).map_err(fail)?;
    let window = |w: [f64; 2]| -> Result<WindowExponents, CliError> {
        Ok(WindowExponents::new(
            dfa::scaling_exponent(&fm, w[0], w[1]).map_err(fail)?,
            dfa::scaling_exponent(&fs, w[0], w[1]).map_err(fail)?,
        ))
    };
    let summary = MagSignDfa {
        order,
        n_box_sizes: grid.len(),
        low: window(cfg.dfa.low)?,
        high: window(cfg.dfa.high)?,
    };
    write_fluct(dir, FLUCT_MAG, &fm)?;
    write_fluct(dir, FLUCT_SIGN, &fs)?;
    write_json(dir, DFA, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesDfa {
    pub order: usize,
    pub n_box_sizes: usize,
    /// Whole grid, `t_min` to a tenth of the record.
    pub full: ScalingExponent,
    /// `None` when fewer than four box sizes fall in the window.
    pub low: Option<ScalingExponent>,
    pub high: Option<ScalingExponent>,
}

/// DFA of the series itself. Writes `fluct.csv` and `dfa.json`.
pub fn dfa_series(ts: &TimeSeries, cfg: &PipelineConfig, dir: &Path) -> Result<SeriesDfa, CliError> {
    let fail = |e| CliError::stage("dfa", &ts.label, e);
    let grid = box_grid(ts.len(), ts.dt, cfg, &ts.label)?;
    let f = dfa::dfa(&ts.values, cfg.dfa.order, &grid, ts.dt).map_err(fail)?;
    let minutes = f.box_minutes();
    let summary = SeriesDfa {
        order: cfg.dfa.order,
        n_box_sizes: grid.len(),
        full: dfa::scaling_exponent(&f, minutes[0], minutes[minutes.len() - 1]).map_err(fail)?,
        low: dfa::scaling_exponent(&f, cfg.dfa.low[0], cfg.dfa.low[1]).ok(),
        high: dfa::scaling_exponent(&f, cfg.dfa.high[0], cfg.dfa.high[1]).ok(),
    };
    write_fluct(dir, FLUCT, &f)?;
    write_json(dir, DFA, &summary)?;
    Ok(summary)
}

/// Surrogate ensemble on the increments. Writes `surrogate.json` and the
/// two-row `surrogate.csv`.
pub fn surrogates(inc: &IncrementSeries, cfg: &PipelineConfig, seed: u64, dir: &Path) -> Result<SurrogateReport, CliError> {
    let label = inc.parent_label.as_str();
    let grid = box_grid(inc.len(), inc.dt, cfg, label)?;
    let report = surrogate::ensemble_test(
        inc,
        &cfg.surrogate_config(seed),
        cfg.surrogate_window(),
        cfg.dfa.order,
        &grid,
    )
    .map_err(|e| CliError::stage("surrogate", label, e))?;
    write_json(dir, SURROGATE_JSON, &report)?;
    let r = &report;
    let text = format!(
        "series,alpha_mag,alpha_mag_std,alpha_sign,alpha_sign_std\noriginal,{},{},{},{}\nsurrogate-mean,{},{},{},{}\n",
        io::fmt_f64(r.alpha_mag_orig),
        io::fmt_f64(r.alpha_mag_stderr_orig),
        io::fmt_f64(r.alpha_sign_orig),
        io::fmt_f64(r.alpha_sign_stderr_orig),
        io::fmt_f64(r.alpha_mag_mean),
        io::fmt_f64(r.alpha_mag_std),
        io::fmt_f64(r.alpha_sign_mean),
        io::fmt_f64(r.alpha_sign_std),
    );
    io::write_file(&out(dir, SURROGATE_CSV), text.as_bytes()).map_err(CliError::output)?;
    Ok(report)
}
