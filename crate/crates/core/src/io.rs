//! CSV ingestion with explicit gap handling, plus the shared CSV/JSON output
//! conventions (17 significant digits for every real number).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{ensure, Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapPolicy {
    /// Any gap aborts ingestion.
    #[default]
    Fail,
    /// Keep the longest run of consecutive samples.
    DropToLongestContiguous,
}

impl std::str::FromStr for GapPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fail" => Ok(GapPolicy::Fail),
            "drop-to-longest-contiguous" => Ok(GapPolicy::DropToLongestContiguous),
            other => Err(format!("unknown gap policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub value_column: String,
    pub time_column: String,
    /// Expected sampling interval in minutes; inferred from the median step when `None`.
    pub expected_dt: Option<f64>,
    pub gap_policy: GapPolicy,
    pub delimiter: u8,
    pub label: Option<String>,
    pub unit: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            value_column: "value".into(),
            time_column: "timestamp".into(),
            expected_dt: None,
            gap_policy: GapPolicy::Fail,
            delimiter: b',',
            label: None,
            unit: String::new(),
        }
    }
}

/// What ingestion kept and dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadReport {
    pub rows_read: usize,
    /// Zero-based data row of the first kept sample.
    pub first_kept_row: usize,
    pub kept: usize,
    pub dropped: usize,
    /// Number of contiguous runs found in the file.
    pub runs: usize,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub series: TimeSeries,
    pub report: LoadReport,
}

#[derive(Clone, Copy, PartialEq)]
enum TimeFormat {
    Epoch,
    Iso,
}

fn parse_iso(text: &str) -> Option<f64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
            let utc = dt.and_utc();
            return Some(utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9);
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp() as f64)
}

/// Reads one value column and one timestamp column into a gap-free series.
///
/// Timestamps may be epoch seconds or ISO-8601 (naive times are taken as UTC);
/// the format is detected from the first data row and must hold for the whole
/// column.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Loaded> {
    let file = fs::File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let value_idx = column(&opts.value_column)?;
    let time_idx = column(&opts.time_column)?;

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut format = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let t_text = record.get(time_idx).unwrap_or("");
        let v_text = record.get(value_idx).unwrap_or("");
        let parse_err = |what, text: &str| Error::Parse {
            path: path.to_path_buf(),
            row,
            what,
            text: text.to_string(),
        };
        let fmt = *format.get_or_insert(if t_text.parse::<f64>().is_ok() {
            TimeFormat::Epoch
        } else {
            TimeFormat::Iso
        });
        let t = match fmt {
            TimeFormat::Epoch => t_text.parse::<f64>().ok(),
            TimeFormat::Iso => parse_iso(t_text),
        }
        .filter(|t| t.is_finite())
        .ok_or_else(|| parse_err("timestamp", t_text))?;
        let v = v_text
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| parse_err("value", v_text))?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::NonMonotoneTimestamps {
                    path: path.to_path_buf(),
                    row,
                    prev,
                    next: t,
                });
            }
        }
        times.push(t);
        values.push(v);
    }
    ensure!(!values.is_empty(), "{}: no data rows", path.display());

    let dt = match opts.expected_dt {
        Some(dt) => {
            ensure!(dt.is_finite() && dt > 0.0, "expected dt must be positive, got {dt}");
            dt
        }
        None => infer_dt_minutes(&times).unwrap_or(1.0),
    };
    let step = dt * 60.0;
    let tol = 1e-3 * step;

    // Contiguous runs as (start, len).
    let mut runs = vec![(0usize, 1usize)];
    for i in 1..times.len() {
        let diff = times[i] - times[i - 1];
        if (diff - step).abs() <= tol {
            runs.last_mut().unwrap().1 += 1;
        } else {
            if opts.gap_policy == GapPolicy::Fail {
                return Err(Error::Gap {
                    path: path.to_path_buf(),
                    row: i,
                    from: times[i - 1],
                    to: times[i],
                    step,
                });
            }
            runs.push((i, 1));
        }
    }
    // Earliest run wins a tie.
    let (start, len) = runs
        .iter()
        .copied()
        .fold((0, 0), |best, run| if run.1 > best.1 { run } else { best });

    let label = opts.label.clone().unwrap_or_else(|| opts.value_column.clone());
    let series = TimeSeries::new(label, dt, values[start..start + len].to_vec())?
        .with_unit(opts.unit.clone())
        .with_t0(times[start]);
    Ok(Loaded {
        series,
        report: LoadReport {
            rows_read: times.len(),
            first_kept_row: start,
            kept: len,
            dropped: times.len() - len,
            runs: runs.len(),
        },
    })
}

/// Median positive step between timestamps, in minutes.
pub fn infer_dt_minutes(times: &[f64]) -> Option<f64> {
    let mut diffs: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
    if diffs.is_empty() {
        return None;
    }
    diffs.sort_by(f64::total_cmp);
    Some(diffs[diffs.len() / 2] / 60.0)
}

/// Formats a real with 17 significant digits; round-trips exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A series in the standard `timestamp,value` layout.
pub fn series_csv(ts: &TimeSeries) -> String {
    let mut out = String::with_capacity(ts.len() * 40);
    out.push_str("timestamp,value\n");
    for (i, v) in ts.values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", ts.time_of(i), fmt_f64(*v)));
    }
    out
}

pub fn write_series_csv(path: &Path, ts: &TimeSeries) -> Result<()> {
    write_file(path, series_csv(ts).as_bytes())
}

/// Writes rows of reals under a header, every cell formatted by [`fmt_f64`].
pub fn write_columns_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..rows {
        let cells: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct SignificantDigits {
    inner: PrettyFormatter<'static>,
}

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Pretty JSON with every float at 17 significant digits. Non-finite floats
/// become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        SignificantDigits {
            inner: PrettyFormatter::new(),
        },
    );
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_file(path, to_json_string(value)?.as_bytes())
}
