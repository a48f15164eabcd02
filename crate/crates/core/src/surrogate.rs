//! Iterative amplitude-adjusted Fourier transform (IAAFT) surrogates and the
//! ensemble comparison of magnitude and sign scaling exponents.
//!
//! A surrogate keeps the exact value distribution of its input and, up to the
//! iteration's tolerance, its Fourier amplitude spectrum, while the Fourier
//! phases are randomized. Correlations that live only in the phases (for
//! example a volatility cascade) are destroyed.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dfa::{self, ScalingExponent};
use crate::error::{ensure, Error, Result};
use crate::series::{mag_sign_values, IncrementSeries};
use crate::stats;
use crate::synth::rng_from_seed;

pub const MIN_LENGTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub count: usize,
    /// Surrogate `i` is drawn from a generator seeded with `seed + i`.
    pub seed: u64,
    pub max_iterations: usize,
    /// Target relative error of the Fourier amplitude spectrum.
    pub spectrum_tolerance: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            count: 100,
            seed: 0,
            max_iterations: 200,
            spectrum_tolerance: 1e-3,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.count >= 1, "surrogate count must be at least 1");
        ensure!(self.max_iterations >= 1, "surrogate iteration cap must be at least 1");
        ensure!(
            self.spectrum_tolerance > 0.0 && self.spectrum_tolerance.is_finite(),
            "spectrum tolerance must be positive, got {}",
            self.spectrum_tolerance
        );
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub values: Vec<f64>,
    pub seed: u64,
    /// Amplitude-adjustment rounds performed.
    pub iterations: usize,
    /// Relative L2 error of the Fourier amplitudes of `values`.
    pub spectrum_error: f64,
    pub converged: bool,
}

struct Spectrum {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    amplitude: Vec<f64>,
    norm: f64,
}

impl Spectrum {
    fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.process(&mut buf);
        let amplitude: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
        let norm = amplitude[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
        Self {
            fft,
            ifft,
            amplitude,
            norm,
        }
    }

    fn transform(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        buf
    }

    /// Relative L2 distance of `|S|` from the target amplitudes, DC excluded.
    fn error(&self, s: &[Complex64]) -> f64 {
        let d: f64 = s[1..]
            .iter()
            .zip(&self.amplitude[1..])
            .map(|(c, a)| (c.norm() - a).powi(2))
            .sum();
        d.sqrt() / self.norm
    }

    /// Replaces the amplitudes of `s` by the target ones, keeping phases, and
    /// returns the real inverse transform.
    fn impose(&self, mut s: Vec<Complex64>) -> Vec<f64> {
        for (c, &a) in s.iter_mut().zip(&self.amplitude) {
            let r = c.norm();
            *c = if r > 0.0 {
                *c * (a / r)
            } else {
                Complex64::new(a, 0.0)
            };
        }
        self.ifft.process(&mut s);
        let n = s.len() as f64;
        s.iter().map(|c| c.re / n).collect()
    }
}

/// Puts the sorted sample values in the rank order of `y`.
fn rank_remap(y: &[f64], sorted: &[f64], out: &mut [f64]) {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    for (rank, &i) in idx.iter().enumerate() {
        out[i] = sorted[rank];
    }
}

/// One IAAFT surrogate. The returned values are always a permutation of the
/// input; if the spectrum tolerance is not met within the iteration cap, the
/// iterate with the smallest spectrum error is returned unconverged.
pub fn make_surrogate(values: &[f64], seed: u64, cfg: &SurrogateConfig) -> Result<Surrogate> {
    ensure!(
        values.len() >= MIN_LENGTH,
        "surrogates need at least {MIN_LENGTH} samples, got {}",
        values.len()
    );
    ensure!(values.iter().all(|v| v.is_finite()), "non-finite sample in surrogate input");
    cfg.validate()?;
    let target = Spectrum::new(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut rng = rng_from_seed(seed);
    let mut current = values.to_vec();
    current.shuffle(&mut rng);
    if target.norm == 0.0 {
        return Ok(Surrogate {
            values: current,
            seed,
            iterations: 0,
            spectrum_error: 0.0,
            converged: true,
        });
    }

    let mut next = vec![0.0; values.len()];
    let mut best = current.clone();
    let mut best_error = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let s = target.transform(&current);
        let err = target.error(&s);
        if err < best_error {
            best_error = err;
            best.copy_from_slice(&current);
        }
        if err < cfg.spectrum_tolerance || iterations == cfg.max_iterations {
            break;
        }
        iterations += 1;
        rank_remap(&target.impose(s), &sorted, &mut next);
        if next == current {
            break;
        }
        std::mem::swap(&mut current, &mut next);
    }
    Ok(Surrogate {
        values: best,
        seed,
        iterations,
        spectrum_error: best_error,
        converged: best_error < cfg.spectrum_tolerance,
    })
}

/// Ensemble statistics of magnitude and sign exponents over the surrogates,
/// next to the exponents of the original increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateReport {
    pub count: usize,
    pub seed: u64,
    pub order: usize,
    /// Fit window in minutes.
    pub window: [f64; 2],
    pub alpha_mag_orig: f64,
    pub alpha_sign_orig: f64,
    pub alpha_mag_stderr_orig: f64,
    pub alpha_sign_stderr_orig: f64,
    pub alpha_mag_mean: f64,
    pub alpha_mag_std: f64,
    pub alpha_sign_mean: f64,
    pub alpha_sign_std: f64,
    /// Set when `count == 1`: the standard deviations are reported as zero.
    pub single_member: bool,
    pub alpha_mag: Vec<f64>,
    pub alpha_sign: Vec<f64>,
    pub spectrum_error: Vec<f64>,
    pub converged: Vec<bool>,
}

impl SurrogateReport {
    /// `(original - mean) / std` for the magnitude exponent.
    pub fn mag_z(&self) -> f64 {
        (self.alpha_mag_orig - self.alpha_mag_mean) / self.alpha_mag_std
    }

    pub fn sign_z(&self) -> f64 {
        (self.alpha_sign_orig - self.alpha_sign_mean) / self.alpha_sign_std
    }
}

/// Magnitude and sign exponents of one increment series.
pub fn mag_sign_exponents(
    increments: &[f64],
    dt: f64,
    order: usize,
    box_sizes: &[usize],
    window: [f64; 2],
) -> Result<(ScalingExponent, ScalingExponent)> {
    let pair = mag_sign_values(increments);
    let fm = dfa::dfa(&pair.magnitude, order, box_sizes, dt)?;
    let fs = dfa::dfa(&pair.sign_as_f64(), order, box_sizes, dt)?;
    Ok((
        dfa::scaling_exponent(&fm, window[0], window[1])?,
        dfa::scaling_exponent(&fs, window[0], window[1])?,
    ))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.len() < 2 {
        (xs[0], 0.0)
    } else {
        (stats::mean(xs), stats::std_dev(xs))
    }
}

/// Builds `cfg.count` surrogates of the increments, decomposes each into
/// magnitude and sign, and fits DFA exponents over `window` (minutes) using the
/// sizes of `box_sizes` that fall inside it.
pub fn ensemble_test(
    increments: &IncrementSeries,
    cfg: &SurrogateConfig,
    window: [f64; 2],
    order: usize,
    box_sizes: &[usize],
) -> Result<SurrogateReport> {
    cfg.validate()?;
    let dt = increments.dt;
    let sizes: Vec<usize> = box_sizes
        .iter()
        .copied()
        .filter(|&n| {
            let t = n as f64 * dt;
            t >= window[0] && t <= window[1]
        })
        .collect();
    ensure!(
        sizes.len() >= 4,
        "only {} box sizes fall in the window [{}, {}] min; need at least 4",
        sizes.len(),
        window[0],
        window[1]
    );
    let (mag, sign) = mag_sign_exponents(&increments.values, dt, order, &sizes, window)?;

    let members: Vec<(Surrogate, f64, f64)> = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let s = make_surrogate(&increments.values, seed, cfg)
                .map_err(|e| Error::Numerical(format!("surrogate {i}: {e}")))?;
            let (m, g) = mag_sign_exponents(&s.values, dt, order, &sizes, window)
                .map_err(|e| Error::Numerical(format!("surrogate {i}: {e}")))?;
            Ok((s, m.alpha, g.alpha))
        })
        .collect::<Result<_>>()?;

    let alpha_mag: Vec<f64> = members.iter().map(|m| m.1).collect();
    let alpha_sign: Vec<f64> = members.iter().map(|m| m.2).collect();
    let (alpha_mag_mean, alpha_mag_std) = mean_std(&alpha_mag);
    let (alpha_sign_mean, alpha_sign_std) = mean_std(&alpha_sign);
    Ok(SurrogateReport {
        count: cfg.count,
        seed: cfg.seed,
        order,
        window,
        alpha_mag_orig: mag.alpha,
        alpha_sign_orig: sign.alpha,
        alpha_mag_stderr_orig: mag.stderr,
        alpha_sign_stderr_orig: sign.stderr,
        alpha_mag_mean,
        alpha_mag_std,
        alpha_sign_mean,
        alpha_sign_std,
        single_member: cfg.count == 1,
        spectrum_error: members.iter().map(|m| m.0.spectrum_error).collect(),
        converged: members.iter().map(|m| m.0.converged).collect(),
        alpha_mag,
        alpha_sign,
    })
}
