//! Detrended fluctuation analysis of arbitrary polynomial order.
//!
//! The profile (cumulative sum of the mean-removed input) is cut into
//! non-overlapping boxes of `n` samples, each box is detrended by a
//! least-squares polynomial, and the residual RMS pooled over all boxes gives
//! `F(n)`. Boxes are laid out from the start and again from the end of the
//! profile so that samples left over when `n` does not divide the length still
//! contribute; all `2 * floor(N / n)` boxes are pooled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::stats;

pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationFunction {
    /// Box sizes in samples, strictly increasing.
    pub box_sizes: Vec<usize>,
    /// `F(n)` for each box size.
    pub fluctuation: Vec<f64>,
    /// Degree of the detrending polynomial (1 = DFA-1).
    pub order: usize,
    /// Minutes per sample.
    pub dt: f64,
}

impl FluctuationFunction {
    pub fn box_minutes(&self) -> Vec<f64> {
        self.box_sizes.iter().map(|&n| n as f64 * self.dt).collect()
    }
}

/// Power-law slope of `F(n)` over one window of timescales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingExponent {
    pub alpha: f64,
    pub stderr: f64,
    /// log10 F at log10 n = 0 (n in minutes).
    pub intercept: f64,
    pub r2: f64,
    /// Window bounds in minutes.
    pub n_lo: f64,
    pub n_hi: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Persistence {
    Uncorrelated,
    Persistent,
    Antipersistent,
}

impl ScalingExponent {
    /// Descriptive label relative to 0.5, uncorrelated when within two
    /// standard errors.
    pub fn persistence(&self) -> Persistence {
        if (self.alpha - 0.5).abs() <= 2.0 * self.stderr {
            Persistence::Uncorrelated
        } else if self.alpha > 0.5 {
            Persistence::Persistent
        } else {
            Persistence::Antipersistent
        }
    }
}

/// Cumulative sum of the mean-removed series.
pub fn profile(series: &[f64]) -> Vec<f64> {
    if series.is_empty() {
        return Vec::new();
    }
    let mean = stats::mean(series);
    let mut acc = 0.0;
    series
        .iter()
        .map(|x| {
            acc += x - mean;
            acc
        })
        .collect()
}

/// Orthonormal polynomial basis of degree `order` sampled on `n` points,
/// laid out as `order + 1` rows of length `n`.
fn orthonormal_basis(n: usize, order: usize) -> Vec<Vec<f64>> {
    let half = (n as f64 - 1.0) / 2.0;
    let u: Vec<f64> = (0..n).map(|i| (i as f64 - half) / half.max(1.0)).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for d in 0..=order {
        let mut v: Vec<f64> = u.iter().map(|x| x.powi(d as i32)).collect();
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(b).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    basis
}

/// Sum of squared residuals of the least-squares fit of `segment` onto `basis`.
fn residual_ss(segment: &[f64], basis: &[Vec<f64>], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(segment);
    for b in basis {
        let c: f64 = scratch.iter().zip(b).map(|(a, b)| a * b).sum();
        scratch.iter_mut().zip(b).for_each(|(a, b)| *a -= c * b);
    }
    scratch.iter().map(|r| r * r).sum()
}

fn fluctuation_at(profile: &[f64], n: usize, basis: &[Vec<f64>]) -> f64 {
    let len = profile.len();
    let boxes = len / n;
    let mut scratch = Vec::with_capacity(n);
    let mut total = 0.0;
    for b in 0..boxes {
        total += residual_ss(&profile[b * n..(b + 1) * n], basis, &mut scratch);
    }
    for b in 0..boxes {
        let start = len - (b + 1) * n;
        total += residual_ss(&profile[start..start + n], basis, &mut scratch);
    }
    (total / (2 * boxes * n) as f64).sqrt()
}

/// Computes `F(n)` for each requested box size.
pub fn dfa(series: &[f64], order: usize, box_sizes: &[usize], dt: f64) -> Result<FluctuationFunction> {
    ensure!(
        (1..=MAX_ORDER).contains(&order),
        "DFA order must lie in 1..={MAX_ORDER}, got {order}"
    );
    ensure!(dt > 0.0 && dt.is_finite(), "dt must be positive");
    ensure!(!box_sizes.is_empty(), "no box sizes given");
    ensure!(
        box_sizes.windows(2).all(|w| w[0] < w[1]),
        "box sizes must be strictly increasing"
    );
    let len = series.len();
    let smallest = box_sizes[0];
    let largest = *box_sizes.last().unwrap();
    ensure!(
        smallest >= order + 2,
        "box size {smallest} is too small for a degree-{order} fit (need at least {})",
        order + 2
    );
    ensure!(
        largest * 4 <= len,
        "box size {largest} leaves fewer than 4 boxes in a series of {len} samples"
    );
    let first = series[0];
    if series.iter().all(|&x| x == first) {
        return Err(Error::Numerical(
            "constant series: fluctuation function undefined".into(),
        ));
    }
    let y = profile(series);
    let fluctuation: Vec<f64> = box_sizes
        .par_iter()
        .map(|&n| fluctuation_at(&y, n, &orthonormal_basis(n, order)))
        .collect();
    Ok(FluctuationFunction {
        box_sizes: box_sizes.to_vec(),
        fluctuation,
        order,
        dt,
    })
}

/// Least-squares slope of log10 F against log10 n over boxes whose size in
/// minutes falls inside `[t_lo, t_hi]`.
pub fn scaling_exponent(f: &FluctuationFunction, t_lo: f64, t_hi: f64) -> Result<ScalingExponent> {
    ensure!(t_lo < t_hi, "fit window [{t_lo}, {t_hi}] is empty");
    let (xs, ys): (Vec<f64>, Vec<f64>) = f
        .box_sizes
        .iter()
        .zip(&f.fluctuation)
        .map(|(&n, &fl)| (n as f64 * f.dt, fl))
        .filter(|&(t, fl)| t >= t_lo && t <= t_hi && fl > 0.0)
        .map(|(t, fl)| (t.log10(), fl.log10()))
        .unzip();
    if xs.len() < 4 {
        return Err(Error::Numerical(format!(
            "only {} box sizes fall in the window [{t_lo}, {t_hi}] min; need at least 4",
            xs.len()
        )));
    }
    let fit = stats::ols(&xs, &ys)
        .ok_or_else(|| Error::Numerical("degenerate regression in fit window".into()))?;
    Ok(ScalingExponent {
        alpha: fit.slope,
        stderr: fit.stderr_slope,
        intercept: fit.intercept,
        r2: fit.r2,
        n_lo: t_lo,
        n_hi: t_hi,
        n_points: fit.n,
    })
}

/// Log-spaced integer grid from `min` to `max` inclusive, `points_per_decade`
/// points per factor of ten, with rounding duplicates removed.
pub fn log_box_grid(min: usize, max: usize, points_per_decade: usize) -> Result<Vec<usize>> {
    ensure!(points_per_decade >= 1, "points per decade must be at least 1");
    ensure!(min >= 1 && min < max, "empty box grid: [{min}, {max}]");
    let (lo, hi) = ((min as f64).log10(), (max as f64).log10());
    let steps = ((hi - lo) * points_per_decade as f64 - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<usize> = (0..=steps)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / steps as f64).round() as usize)
        .map(|n| n.clamp(min, max))
        .collect();
    grid.dedup();
    Ok(grid)
}

/// Box grid from `t_min` minutes up to one tenth of the record.
pub fn default_box_grid(n: usize, dt: f64, t_min: f64, points_per_decade: usize) -> Result<Vec<usize>> {
    ensure!(dt > 0.0 && t_min > 0.0, "dt and t_min must be positive");
    let min = (t_min / dt).round() as usize;
    let max = n / 10;
    ensure!(
        min >= 2 && min < max,
        "empty box grid: t_min = {t_min} min gives {min} samples, one tenth of the record is {max}"
    );
    log_box_grid(min, max, points_per_decade)
}
