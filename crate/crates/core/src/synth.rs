//! Synthetic signals with known ground truth, used to check every estimator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::series::{cumulative_sum, TimeSeries};

/// Seeded generator used across the crate (ChaCha8, counter based).
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SignalKind {
    /// i.i.d. standard Gaussian.
    White,
    /// Gaussian noise with power spectrum proportional to `f^-beta`.
    Powerlaw { beta: f64 },
    /// Cumulative sum of white noise.
    IntegratedWhite,
    /// Integrated Gaussian noise modulated by a binary multiplicative cascade
    /// with log-normal weights: increments have a correlated magnitude but
    /// independent signs.
    Cascade { depth: u32, sigma: f64 },
    /// Gaussian noise whose DFA exponent is `alpha_short` for periods below
    /// `crossover` samples and `alpha_long` above it.
    TwoRegime {
        alpha_short: f64,
        alpha_long: f64,
        crossover: f64,
    },
    Tone { period: f64, amplitude: f64 },
    Ramp { slope: f64 },
}

impl SignalKind {
    pub fn name(&self) -> &'static str {
        match self {
            SignalKind::White => "white",
            SignalKind::Powerlaw { .. } => "powerlaw",
            SignalKind::IntegratedWhite => "integrated-white",
            SignalKind::Cascade { .. } => "cascade",
            SignalKind::TwoRegime { .. } => "two-regime",
            SignalKind::Tone { .. } => "tone",
            SignalKind::Ramp { .. } => "ramp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: SignalKind,
    pub n: usize,
    pub seed: u64,
    /// Sampling interval in minutes.
    #[serde(default = "one")]
    pub dt: f64,
}

fn one() -> f64 {
    1.0
}

impl GeneratorSpec {
    pub fn new(kind: SignalKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            seed,
            dt: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.n >= 16, "generator length must be at least 16, got {}", self.n);
        ensure!(self.dt > 0.0 && self.dt.is_finite(), "dt must be positive");
        match self.kind {
            SignalKind::Powerlaw { beta } => {
                ensure!((0.0..=3.0).contains(&beta), "beta must lie in [0, 3], got {beta}")
            }
            SignalKind::Cascade { depth, sigma } => {
                ensure!((2..=30).contains(&depth), "cascade depth must lie in [2, 30], got {depth}");
                ensure!(sigma >= 0.0 && sigma.is_finite(), "cascade sigma must be non-negative");
            }
            SignalKind::TwoRegime {
                alpha_short,
                alpha_long,
                crossover,
            } => {
                for a in [alpha_short, alpha_long] {
                    ensure!((0.5..=2.0).contains(&a), "two-regime exponents must lie in [0.5, 2], got {a}");
                }
                ensure!(
                    crossover >= 2.0 && crossover < self.n as f64,
                    "crossover period must lie in [2, n), got {crossover}"
                );
            }
            SignalKind::Tone { period, amplitude } => {
                ensure!(period > 0.0 && period.is_finite(), "tone period must be positive");
                ensure!(amplitude.is_finite(), "tone amplitude must be finite");
            }
            SignalKind::Ramp { slope } => ensure!(slope.is_finite(), "ramp slope must be finite"),
            SignalKind::White | SignalKind::IntegratedWhite => {}
        }
        Ok(())
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let n = spec.n;
    let values = match spec.kind {
        SignalKind::White => white(&mut rng, n),
        SignalKind::Powerlaw { beta } => powerlaw(&mut rng, n, beta),
        SignalKind::IntegratedWhite => cumulative_sum(&white(&mut rng, n)),
        SignalKind::Cascade { depth, sigma } => cascade(&mut rng, n, depth, sigma),
        SignalKind::TwoRegime {
            alpha_short,
            alpha_long,
            crossover,
        } => {
            let (bs, bl) = (2.0 * alpha_short - 1.0, 2.0 * alpha_long - 1.0);
            let fc = 1.0 / crossover;
            spectral_synthesis(&mut rng, n, |f| {
                if f >= fc {
                    f.powf(-bs / 2.0)
                } else {
                    fc.powf(-bs / 2.0) * (f / fc).powf(-bl / 2.0)
                }
            })
        }
        SignalKind::Tone { period, amplitude } => (0..n)
            .map(|i| amplitude * (2.0 * std::f64::consts::PI * i as f64 / period).sin())
            .collect(),
        SignalKind::Ramp { slope } => (0..n).map(|i| slope * i as f64).collect(),
    };
    TimeSeries::new(spec.kind.name(), spec.dt, values)
}

pub fn white<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn powerlaw<R: Rng>(rng: &mut R, n: usize, beta: f64) -> Vec<f64> {
    spectral_synthesis(rng, n, |f| f.powf(-beta / 2.0))
}

/// Complex Gaussian Fourier coefficients scaled by `amplitude(f)` (f in
/// cycles per sample), DC zeroed, Hermitian so the inverse transform is real.
/// Output is rescaled to zero mean and unit variance.
fn spectral_synthesis<R: Rng>(rng: &mut R, n: usize, amplitude: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    for k in 1..=half {
        let amp = amplitude(k as f64 / n as f64);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        if n % 2 == 0 && k == half {
            spec[k] = Complex64::new(amp * re, 0.0);
        } else {
            let c = Complex64::new(re, im) * (amp / std::f64::consts::SQRT_2);
            spec[k] = c;
            spec[n - k] = c.conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let mut out: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    let sd = (out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    for v in &mut out {
        *v = (*v - mean) / sd;
    }
    out
}

fn cascade<R: Rng>(rng: &mut R, n: usize, depth: u32, sigma: f64) -> Vec<f64> {
    let leaves = 1usize << depth;
    let mut log_w = vec![0.0f64; 1];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(log_w.len() * 2);
        for &parent in &log_w {
            for _ in 0..2 {
                let g: f64 = rng.sample(StandardNormal);
                next.push(parent + sigma * g - 0.5 * sigma * sigma);
            }
        }
        log_w = next;
    }
    let per_leaf = n.div_ceil(leaves);
    let inc: Vec<f64> = (0..n)
        .map(|i| {
            let g: f64 = rng.sample(StandardNormal);
            log_w[i / per_leaf].exp() * g
        })
        .collect();
    cumulative_sum(&inc)
}
