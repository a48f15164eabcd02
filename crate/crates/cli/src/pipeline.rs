//! Full chain over every configured input.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tsscale_core::series;
use tsscale_core::{io, TimeSeries};

use crate::config::PipelineConfig;
use crate::exit::CliError;
use crate::report::{Pearson, PipelineReport, Seeds, SeriesReport, TOOL, VERSION};
use crate::stages;

pub const REPORT: &str = "report.json";
pub const MANIFEST: &str = "MANIFEST";

/// Plain-text record of which stages finished, rewritten after each one so
/// an aborted run still says how far it got.
struct Manifest {
    path: PathBuf,
    done: Vec<String>,
}

impl Manifest {
    fn start(dir: &Path) -> Result<Self, CliError> {
        let m = Self {
            path: dir.join(MANIFEST),
            done: Vec::new(),
        };
        m.write("running", None)?;
        Ok(m)
    }

    fn write(&self, status: &str, error: Option<&CliError>) -> Result<(), CliError> {
        let mut text = format!("{TOOL} {VERSION}\nstatus {status}\n");
        if let Some(e) = error {
            text.push_str(&format!("exit {}\nerror {}\n", e.code, e.message.replace('\n', " ")));
        }
        for d in &self.done {
            text.push_str("done ");
            text.push_str(d);
            text.push('\n');
        }
        io::write_file(&self.path, text.as_bytes()).map_err(CliError::output)
    }

    fn record(&mut self, entry: String) -> Result<(), CliError> {
        self.done.push(entry);
        self.write("running", None)
    }
}

/// Trims series on a shared sampling interval to their common time span.
fn align(series: &[TimeSeries]) -> Result<(f64, Vec<TimeSeries>), String> {
    let dt = series[0].dt;
    if series.iter().any(|s| (s.dt - dt).abs() > 1e-9 * dt) {
        return Err("series have different sampling intervals".into());
    }
    let step = dt * 60.0;
    let start = series.iter().map(|s| s.t0).fold(f64::NEG_INFINITY, f64::max);
    let end = series
        .iter()
        .map(|s| s.time_of(s.len() - 1))
        .fold(f64::INFINITY, f64::min);
    if end < start {
        return Err("series do not overlap in time".into());
    }
    let n = ((end - start) / step).round() as usize + 1;
    let mut out = Vec::with_capacity(series.len());
    for s in series {
        let off = (start - s.t0) / step;
        if (off - off.round()).abs() > 1e-6 {
            return Err(format!("series `{}` is not on the shared time grid", s.label));
        }
        let i = off.round() as usize;
        let values = s.values[i..i + n].to_vec();
        out.push(s.with_values(s.label.clone(), values).with_t0(start));
    }
    Ok((start, out))
}

fn pearson(series: &[TimeSeries]) -> Pearson {
    let skipped = |reason: String| Pearson {
        start: None,
        samples: 0,
        matrix: None,
        skipped: Some(reason),
    };
    let (start, aligned) = match align(series) {
        Ok(a) => a,
        Err(reason) => return skipped(reason),
    };
    let samples = aligned[0].len();
    match series::pearson_matrix(&aligned) {
        Ok(m) => Pearson {
            start: Some(start),
            samples,
            matrix: Some(m),
            skipped: None,
        },
        Err(e) => skipped(e.to_string()),
    }
}

fn artifacts(label: &str, names: &[&str]) -> Vec<String> {
    names.iter().map(|n| format!("{label}/{n}")).collect()
}

struct SeriesOutput {
    report: SeriesReport,
    original: TimeSeries,
    trend: TimeSeries,
}

fn run_series(
    index: usize,
    cfg: &PipelineConfig,
    surrogate_seed: u64,
    manifest: &mut Manifest,
) -> Result<SeriesOutput, CliError> {
    let input = &cfg.inputs[index];
    let label = input.label.as_str();
    let dir = cfg.output_dir.join(label);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))?;
    let mut done = |stage: &str| manifest.record(format!("{label} {stage}"));
    let mut files = BTreeMap::new();

    let (ts, ingest) = stages::ingest(input, cfg, &dir)?;
    files.insert("ingest".to_string(), artifacts(label, &[stages::SERIES, stages::INGEST]));
    done("ingest")?;

    let distfit = stages::distfit(&ts, cfg, &dir)?;
    files.insert("distfit".to_string(), artifacts(label, &[stages::DISTFIT]));
    done("distfit")?;

    let spectral = stages::psd(&ts, cfg, &dir)?;
    files.insert("psd".to_string(), artifacts(label, &[stages::PSD, stages::SPECTRAL]));
    done("psd")?;

    let (trend, residual, ssa) = stages::ssa(&ts, cfg, &dir)?;
    files.insert(
        "ssa".to_string(),
        artifacts(label, &[stages::EIGVALS, stages::TREND, stages::RESIDUAL, stages::SSA]),
    );
    done("ssa")?;

    let inc = stages::magsign(&residual, &dir)?;
    files.insert("magsign".to_string(), artifacts(label, &[stages::MAGNITUDE, stages::SIGN]));
    done("magsign")?;

    let dfa = stages::dfa_magsign(&inc, cfg, &dir)?;
    files.insert(
        "dfa".to_string(),
        artifacts(label, &[stages::FLUCT_MAG, stages::FLUCT_SIGN, stages::DFA]),
    );
    done("dfa")?;

    let surrogate = stages::surrogates(&inc, cfg, surrogate_seed, &dir)?;
    files.insert(
        "surrogate".to_string(),
        artifacts(label, &[stages::SURROGATE_JSON, stages::SURROGATE_CSV]),
    );
    done("surrogate")?;

    Ok(SeriesOutput {
        report: SeriesReport {
            label: label.to_string(),
            artifacts: files,
            ingest,
            distfit,
            spectral,
            ssa,
            dfa,
            surrogate,
        },
        original: ts,
        trend,
    })
}

/// Validates `cfg`, runs every stage for every input under
/// `cfg.output_dir`, and writes `report.json`. Nothing is created when the
/// configuration is invalid.
pub fn run_pipeline(cfg: &PipelineConfig, seed: u64) -> Result<PipelineReport, CliError> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", out.display())))?;
    let mut manifest = Manifest::start(out)?;
    match run_all(cfg, seed, &mut manifest) {
        Ok(report) => {
            manifest.write("complete", None)?;
            Ok(report)
        }
        Err(e) => {
            // The original failure matters more than a failed manifest write.
            let _ = manifest.write("failed", Some(&e));
            Err(e)
        }
    }
}

fn run_all(cfg: &PipelineConfig, seed: u64, manifest: &mut Manifest) -> Result<PipelineReport, CliError> {
    let surrogate_seed = cfg.surrogate_seed(seed);
    let mut outputs = Vec::with_capacity(cfg.inputs.len());
    for i in 0..cfg.inputs.len() {
        outputs.push(run_series(i, cfg, surrogate_seed, manifest)?);
    }
    let originals: Vec<TimeSeries> = outputs.iter().map(|o| o.original.clone()).collect();
    let trends: Vec<TimeSeries> = outputs.iter().map(|o| o.trend.clone()).collect();
    let report = PipelineReport {
        tool: TOOL.to_string(),
        version: VERSION.to_string(),
        seeds: Seeds {
            global: seed,
            surrogate: surrogate_seed,
        },
        config: PipelineConfig { seed, ..cfg.clone() },
        series: outputs.into_iter().map(|o| o.report).collect(),
        pearson_originals: pearson(&originals),
        pearson_trends: pearson(&trends),
    };
    io::write_json(&cfg.output_dir.join(REPORT), &report).map_err(CliError::output)?;
    manifest.record(REPORT.to_string())?;
    Ok(report)
}

/// Reads a report back, rejecting unknown or missing fields.
pub fn read_report(path: &Path) -> Result<PipelineReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::internal(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::internal(format!("invalid report {}: {e}", path.display())))
}
