//! Power spectral density on a logarithmic frequency axis (LPSD) and
//! power-law exponent fits.
//!
//! Every output frequency gets its own segment length: low frequencies use
//! long segments (fine resolution, few averages), high frequencies short ones
//! (coarse resolution matching the log spacing, many averages). The periodogram
//! of each windowed, mean-removed segment is evaluated exactly at the target
//! frequency and averaged over overlapping segments.
//!
//! Frequencies are in cycles per minute; power is a one-sided density in
//! `unit² · min`, normalized so that integrating it over frequency gives the
//! variance of the series.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::series::TimeSeries;
use crate::stats;
use statrs::function::gamma::digamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            // Periodic Hann: sums exactly to len/2 and overlaps to a constant at 50%.
            WindowKind::Hann => (0..len)
                .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / len as f64).cos()))
                .collect(),
        }
    }
}

impl std::str::FromStr for WindowKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "hann" => Ok(WindowKind::Hann),
            "rectangular" => Ok(WindowKind::Rectangular),
            other => Err(format!("unknown window `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpsdConfig {
    pub n_freqs: usize,
    /// Lowest frequency in min⁻¹; `None` means `min_bin / (N dt)`.
    pub f_min: Option<f64>,
    /// Highest frequency in min⁻¹; `None` means Nyquist.
    pub f_max: Option<f64>,
    pub window: WindowKind,
    /// Fractional overlap between consecutive segments.
    pub overlap: f64,
    /// Averages aimed for where the frequency spacing allows it.
    pub desired_averages: usize,
    /// Averages kept even at the lowest frequencies.
    pub min_averages: usize,
    pub min_segment: usize,
    /// Smallest bin index `f L dt` a segment may place the target frequency on;
    /// below two the taper's main lobe overlaps DC and the removed segment mean.
    pub min_bin: f64,
}

impl Default for LpsdConfig {
    fn default() -> Self {
        Self {
            n_freqs: 200,
            f_min: None,
            f_max: None,
            window: WindowKind::Hann,
            overlap: 0.5,
            desired_averages: 100,
            min_averages: 4,
            min_segment: 16,
            min_bin: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub n_freqs: usize,
    pub window_kind: WindowKind,
    /// Number of averaged segments at each frequency.
    pub segments_per_freq: Vec<usize>,
    pub segment_lengths: Vec<usize>,
    /// True where the preferred segment length was clamped to `[min_segment, N]`.
    pub snapped: Vec<bool>,
}

impl PsdEstimate {
    /// Trapezoidal integral of the density over the frequency grid.
    pub fn integrated_power(&self) -> f64 {
        self.frequencies
            .windows(2)
            .zip(self.power.windows(2))
            .map(|(f, p)| 0.5 * (p[0] + p[1]) * (f[1] - f[0]))
            .sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.power.iter_mut().for_each(|p| *p *= k);
        out
    }
}

/// Least-squares fit of `log10 P = intercept - beta * log10 f`.
///
/// Each `log10 P` is first corrected for the downward bias of the logarithm of
/// an average of `K` periodogram values, `(ψ(K) - ln K) / ln 10`, where `K` is
/// the segment count at that frequency, and weighted by the inverse variance
/// of that logarithm, `1 / ψ'(K)`. The low frequencies of an LPSD grid are
/// densely sampled but averaged over few segments; unweighted they dominate
/// the slope's scatter. A `K` of zero marks exact input: no correction, unit
/// weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralFit {
    /// Positive for spectra falling like `1 / f^beta`.
    pub beta: f64,
    pub intercept: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub stderr_beta: f64,
    pub r2: f64,
    pub n_points: usize,
}

/// Log-spaced frequency grid shared by [`lpsd`].
pub fn log_frequency_grid(f_min: f64, f_max: f64, n: usize) -> Vec<f64> {
    let g = (f_max / f_min).ln();
    (0..n)
        .map(|j| {
            if j + 1 == n {
                f_max
            } else {
                f_min * (g * j as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

pub fn lpsd(ts: &TimeSeries, cfg: &LpsdConfig) -> Result<PsdEstimate> {
    let x = &ts.values;
    let n = x.len();
    let fs = 1.0 / ts.dt;
    let nyquist = fs / 2.0;
    let lowest = fs / n as f64;
    ensure!(cfg.n_freqs >= 2, "need at least 2 frequencies, got {}", cfg.n_freqs);
    ensure!(
        (0.0..1.0).contains(&cfg.overlap),
        "overlap must lie in [0, 1), got {}",
        cfg.overlap
    );
    ensure!(cfg.min_averages >= 1 && cfg.desired_averages >= cfg.min_averages, "invalid averaging counts");
    ensure!(n >= cfg.min_segment, "series of {n} samples is shorter than one segment");
    ensure!(cfg.min_bin >= 1.0, "min_bin must be at least 1");
    let f_min = cfg.f_min.unwrap_or(lowest * cfg.min_bin);
    let f_max = cfg.f_max.unwrap_or(nyquist);
    ensure!(
        f_min >= lowest * (1.0 - 1e-12),
        "f_min = {f_min} is below 1/(N dt) = {lowest}"
    );
    ensure!(
        f_max <= nyquist * (1.0 + 1e-12),
        "f_max = {f_max} is above Nyquist {nyquist}"
    );
    ensure!(f_min < f_max, "f_min = {f_min} must be below f_max = {f_max}");

    let frequencies = log_frequency_grid(f_min, f_max, cfg.n_freqs);
    let spacing = (f_max / f_min).ln() / (cfg.n_freqs - 1) as f64;
    let resolution_avg = lowest * (1.0 + (1.0 - cfg.overlap) * (cfg.desired_averages - 1) as f64);
    let resolution_min = lowest * (1.0 + (1.0 - cfg.overlap) * (cfg.min_averages - 1) as f64);

    let per_freq: Vec<(f64, usize, usize, bool)> = frequencies
        .par_iter()
        .map(|&f| {
            let r_spacing = f * (spacing.exp() - 1.0);
            let r = if r_spacing >= resolution_avg {
                r_spacing
            } else if r_spacing >= resolution_min {
                (resolution_avg * r_spacing).sqrt()
            } else {
                resolution_min
            };
            let preferred = (fs / r).max(cfg.min_bin * fs / f).round() as usize;
            let len = preferred.clamp(cfg.min_segment, n);
            let (power, segments) = segment_average(x, len, f * ts.dt, cfg);
            (power * 2.0 / fs, segments, len, len != preferred)
        })
        .collect();

    Ok(PsdEstimate {
        power: per_freq.iter().map(|p| p.0).collect(),
        segments_per_freq: per_freq.iter().map(|p| p.1).collect(),
        segment_lengths: per_freq.iter().map(|p| p.2).collect(),
        snapped: per_freq.iter().map(|p| p.3).collect(),
        frequencies,
        n_freqs: cfg.n_freqs,
        window_kind: cfg.window,
    })
}

/// Mean of `|Σ w_k x_k e^{-2πi ν k}|² / Σ w_k²` over overlapping segments of
/// length `len`, where `ν` is in cycles per sample.
fn segment_average(x: &[f64], len: usize, nu: f64, cfg: &LpsdConfig) -> (f64, usize) {
    let window = cfg.window.coefficients(len);
    let norm: f64 = window.iter().map(|w| w * w).sum();
    let kernel: Vec<(f64, f64)> = window
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let (s, c) = (2.0 * PI * nu * k as f64).sin_cos();
            (w * c, -w * s)
        })
        .collect();
    let step = (((1.0 - cfg.overlap) * len as f64).floor() as usize).max(1);
    let segments = (x.len() - len) / step + 1;
    let mut acc = 0.0;
    for s in 0..segments {
        let seg = &x[s * step..s * step + len];
        let mean = stats::mean(seg);
        let (mut re, mut im) = (0.0, 0.0);
        for (v, (kr, ki)) in seg.iter().zip(&kernel) {
            let d = v - mean;
            re += d * kr;
            im += d * ki;
        }
        acc += re * re + im * im;
    }
    (acc / segments as f64 / norm, segments)
}

pub fn fit_spectral_exponent(psd: &PsdEstimate, f_lo: f64, f_hi: f64) -> Result<SpectralFit> {
    ensure!(f_lo > 0.0 && f_lo < f_hi, "invalid fit band [{f_lo}, {f_hi}]");
    let band: Vec<(f64, f64, usize)> = psd
        .frequencies
        .iter()
        .zip(&psd.power)
        .zip(&psd.segments_per_freq)
        .filter(|((f, _), _)| **f >= f_lo && **f <= f_hi)
        .map(|((f, p), k)| (*f, *p, *k))
        .collect();
    if band.len() < 5 {
        return Err(Error::Numerical(format!(
            "only {} PSD points in [{f_lo}, {f_hi}]; need at least 5",
            band.len()
        )));
    }
    if let Some((f, p, _)) = band.iter().find(|(_, p, _)| !(*p > 0.0)) {
        return Err(Error::Numerical(format!("non-positive power {p} at f = {f}")));
    }
    let xs: Vec<f64> = band.iter().map(|(f, _, _)| f.log10()).collect();
    let ys: Vec<f64> = band
        .iter()
        .map(|(_, p, k)| p.log10() - log_average_bias(*k))
        .collect();
    let weights: Vec<f64> = band.iter().map(|(_, _, k)| log_average_weight(*k)).collect();
    let fit = stats::wls(&xs, &ys, &weights).ok_or_else(|| Error::Numerical("degenerate spectral fit".into()))?;
    Ok(SpectralFit {
        beta: -fit.slope,
        intercept: fit.intercept,
        f_lo,
        f_hi,
        stderr_beta: fit.stderr_slope,
        r2: fit.r2,
        n_points: fit.n,
    })
}

/// `E[log10(mean of k unit-mean exponentials)]`; zero for `k = 0` (exact input).
pub fn log_average_bias(k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let k = k as f64;
    (digamma(k) - k.ln()) / std::f64::consts::LN_10
}

/// Inverse variance of `ln(mean of k unit-mean exponentials)`, i.e. `1 / ψ'(k)`;
/// one for `k = 0` (exact input).
pub fn log_average_weight(k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    1.0 / stats::trigamma(k as f64)
}
