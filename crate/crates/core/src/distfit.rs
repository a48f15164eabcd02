//! Maximum-likelihood fits of Weibull, Gamma and GEV distributions and their
//! ranking by Kullback-Leibler divergence from the empirical histogram.
//!
//! Divergences are in nats. The empirical density is a histogram with
//! Freedman-Diaconis bin width spanning `[min, max]` of the data; each fitted
//! bin probability is the difference of the model CDF at the bin edges.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution as _, Open01};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, gamma, gamma_lr, gamma_ur, ln_gamma};

use crate::error::{ensure, Error, Result};
use crate::series::TimeSeries;
use crate::stats;

pub const MIN_SAMPLES: usize = 30;
const MAX_BINS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    Weibull,
    Gamma,
    #[serde(rename = "GEV")]
    Gev,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Weibull, Family::Gamma, Family::Gev];

    pub fn name(self) -> &'static str {
        match self {
            Family::Weibull => "Weibull",
            Family::Gamma => "Gamma",
            Family::Gev => "GEV",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weibull" => Ok(Family::Weibull),
            "gamma" => Ok(Family::Gamma),
            "gev" => Ok(Family::Gev),
            _ => Err(Error::InvalidInput(format!("unknown distribution family `{s}`"))),
        }
    }
}

/// A fully parameterized member of one of the three families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", deny_unknown_fields)]
pub enum Distribution {
    Weibull { shape: f64, scale: f64 },
    /// Shape `α`, rate `β`.
    Gamma { shape: f64, rate: f64 },
    #[serde(rename = "GEV")]
    Gev { location: f64, scale: f64, shape: f64 },
}

/// `ln(1 + w) / w`, continuous at zero.
fn ln1p_over(w: f64) -> f64 {
    if w.abs() < 1e-10 {
        1.0 - w / 2.0
    } else {
        w.ln_1p() / w
    }
}

/// `(ln(1 + w) - w / (1 + w)) / w²`, continuous at zero.
fn gev_g(w: f64) -> f64 {
    if w.abs() < 1e-3 {
        0.5 - w * (2.0 / 3.0 - w * (0.75 - w * (0.8 - w * 5.0 / 6.0)))
    } else {
        (w.ln_1p() - w / (1.0 + w)) / (w * w)
    }
}

impl Distribution {
    pub fn family(&self) -> Family {
        match self {
            Distribution::Weibull { .. } => Family::Weibull,
            Distribution::Gamma { .. } => Family::Gamma,
            Distribution::Gev { .. } => Family::Gev,
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            Distribution::Weibull { shape, scale } => vec![("shape", shape), ("scale", scale)],
            Distribution::Gamma { shape, rate } => vec![("shape", shape), ("rate", rate)],
            Distribution::Gev { location, scale, shape } => {
                vec![("location", location), ("scale", scale), ("shape", shape)]
            }
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Weibull { shape, scale } => shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite(),
            Distribution::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            Distribution::Gev { location, scale, shape } => {
                location.is_finite() && scale > 0.0 && scale.is_finite() && shape.is_finite()
            }
        };
        ensure!(ok, "invalid parameters {self:?}");
        Ok(())
    }

    /// `t^(-1/ξ)` for the GEV, or `None` outside the support.
    fn gev_u(location: f64, scale: f64, shape: f64, x: f64) -> Option<f64> {
        let z = (x - location) / scale;
        let w = shape * z;
        if w <= -1.0 {
            return None;
        }
        Some((-z * ln1p_over(w)).exp())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
            Distribution::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, rate * x)
                }
            }
            Distribution::Gev { location, scale, shape } => match Self::gev_u(location, scale, shape, x) {
                Some(u) => (-u).exp(),
                None if shape > 0.0 => 0.0,
                None => 1.0,
            },
        }
    }

    /// Survival function `1 - F(x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Weibull { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-(x / scale).powf(shape)).exp()
                }
            }
            Distribution::Gamma { shape, rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    gamma_ur(shape, rate * x)
                }
            }
            Distribution::Gev { location, scale, shape } => match Self::gev_u(location, scale, shape, x) {
                Some(u) => -(-u).exp_m1(),
                None if shape > 0.0 => 1.0,
                None => 0.0,
            },
        }
    }

    /// Probability of `(a, b]`.
    pub fn interval_probability(&self, a: f64, b: f64) -> f64 {
        let lower = self.cdf(a);
        if lower > 0.5 {
            (self.sf(a) - self.sf(b)).max(0.0)
        } else {
            (self.cdf(b) - lower).max(0.0)
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Weibull { shape, scale } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let y = x / scale;
                shape.ln() - scale.ln() + (shape - 1.0) * y.ln() - y.powf(shape)
            }
            Distribution::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Distribution::Gev { location, scale, shape } => {
                let z = (x - location) / scale;
                let w = shape * z;
                if w <= -1.0 {
                    return f64::NEG_INFINITY;
                }
                let a = z * ln1p_over(w);
                -scale.ln() - w.ln_1p() - a - (-a).exp()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match *self {
            Distribution::Weibull { shape, scale } => (0..n)
                .map(|_| {
                    let u: f64 = Open01.sample(rng);
                    scale * (-u.ln()).powf(1.0 / shape)
                })
                .collect(),
            Distribution::Gamma { shape, rate } => {
                let g = rand_distr::Gamma::new(shape, 1.0 / rate).expect("validated gamma parameters");
                (0..n).map(|_| g.sample(rng)).collect()
            }
            Distribution::Gev { location, scale, shape } => (0..n)
                .map(|_| {
                    let u: f64 = Open01.sample(rng);
                    let e = (-u.ln()).ln();
                    let v = if shape == 0.0 {
                        -e
                    } else {
                        (-shape * e).exp_m1() / shape
                    };
                    location + scale * v
                })
                .collect(),
        }
    }

    pub fn loglik(&self, values: &[f64]) -> f64 {
        values.iter().map(|&x| self.ln_pdf(x)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistfitConfig {
    /// Fixed bin count; Freedman-Diaconis when `None`.
    pub n_bins: Option<usize>,
    /// Replacement for exact zeros in Weibull and Gamma fits.
    pub zero_shift: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for DistfitConfig {
    fn default() -> Self {
        Self {
            n_bins: None,
            zero_shift: 1e-6,
            max_iterations: 500,
            gradient_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlFlag {
    Ok,
    /// A slightly negative sum was clamped to zero.
    ClampedNegative,
    /// A bin with data has zero model probability.
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlDivergence {
    /// Nats. `+inf` when flagged [`KlFlag::Infinite`].
    pub value: f64,
    pub flag: KlFlag,
    /// Raw sum before clamping.
    pub raw: f64,
    /// First bin with data but zero model probability.
    pub offending_bin: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistFit {
    pub distribution: Distribution,
    pub loglik: f64,
    pub n: usize,
    /// Samples equal to zero that were replaced by the configured shift.
    pub shifted_zeros: usize,
    /// Gradient tolerance reached. `false` means the optimizer stalled at a
    /// point whose gradient is small but above the tolerance.
    pub converged: bool,
    pub iterations: usize,
    pub kl: Option<KlDivergence>,
}

impl DistFit {
    pub fn family(&self) -> Family {
        self.distribution.family()
    }

    fn kl_value(&self) -> f64 {
        self.kl.as_ref().map_or(f64::INFINITY, |k| k.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinRule {
    FreedmanDiaconis,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDensity {
    pub bin_edges: Vec<f64>,
    pub probs: Vec<f64>,
    pub n: usize,
    pub rule: BinRule,
}

impl EmpiricalDensity {
    pub fn n_bins(&self) -> usize {
        self.probs.len()
    }
}

/// Histogram of `values` over `[min, max]`.
pub fn empirical_density(values: &[f64], n_bins: Option<usize>) -> Result<EmpiricalDensity> {
    let n = values.len();
    ensure!(n >= 2, "empirical density needs at least two samples");
    ensure!(values.iter().all(|v| v.is_finite()), "non-finite sample in density input");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    ensure!(hi > lo, "all samples are equal; no density to estimate");

    let (bins, rule) = match n_bins {
        Some(b) => {
            ensure!(b >= 1, "bin count must be positive");
            (b, BinRule::Fixed)
        }
        None => {
            let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
            let h = 2.0 * iqr / (n as f64).cbrt();
            let b = if h > 0.0 {
                ((hi - lo) / h).ceil() as usize
            } else {
                (n as f64).sqrt().ceil() as usize
            };
            (b.clamp(1, MAX_BINS), BinRule::FreedmanDiaconis)
        }
    };

    let width = (hi - lo) / bins as f64;
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    bin_edges.push(hi);
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(EmpiricalDensity {
        bin_edges,
        probs,
        n,
        rule,
    })
}

/// `Σ p_i ln(p_i / q_i)` over bins with `p_i > 0`.
pub fn kl_from_density(density: &EmpiricalDensity, dist: &Distribution) -> Result<KlDivergence> {
    let occupied = density.probs.iter().filter(|&&p| p > 0.0).count();
    ensure!(occupied >= 2, "density has {occupied} non-empty bin(s); need at least 2");
    dist.validate()?;
    let mut raw = 0.0;
    for (i, &p) in density.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let q = dist.interval_probability(density.bin_edges[i], density.bin_edges[i + 1]);
        if q <= 0.0 {
            return Ok(KlDivergence {
                value: f64::INFINITY,
                flag: KlFlag::Infinite,
                raw: f64::INFINITY,
                offending_bin: Some(i),
            });
        }
        raw += p * (p / q).ln();
    }
    let (value, flag) = if raw < 0.0 {
        (0.0, KlFlag::ClampedNegative)
    } else {
        (raw, KlFlag::Ok)
    };
    Ok(KlDivergence {
        value,
        flag,
        raw,
        offending_bin: None,
    })
}

pub fn kl_divergence(data: &TimeSeries, dist: &Distribution, n_bins: Option<usize>) -> Result<KlDivergence> {
    kl_from_density(&empirical_density(&data.values, n_bins)?, dist)
}

fn positive_support(values: &[f64], family: Family, shift: f64) -> Result<(Vec<f64>, usize)> {
    if let Some(bad) = values.iter().find(|&&v| v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "{family} support is positive; found sample {bad}"
        )));
    }
    ensure!(shift > 0.0, "zero shift must be positive, got {shift}");
    let zeros = values.iter().filter(|&&v| v == 0.0).count();
    let v = values.iter().map(|&v| if v == 0.0 { shift } else { v }).collect();
    Ok((v, zeros))
}

struct Solved {
    dist: Distribution,
    converged: bool,
    iterations: usize,
}

/// Profile score in the shape parameter, on data rescaled to `max = 1`.
fn weibull_score(y: &[f64], mean_ln: f64, k: f64) -> (f64, f64) {
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for &v in y {
        let l = v.ln();
        let p = v.powf(k);
        s0 += p;
        s1 += p * l;
        s2 += p * l * l;
    }
    let a = s1 / s0;
    (a - 1.0 / k - mean_ln, s2 / s0 - a * a + 1.0 / (k * k))
}

/// Safeguarded Newton iteration on an increasing `f` with positive root.
fn newton_positive(
    mut x: f64,
    f: impl Fn(f64) -> (f64, f64),
    increasing: bool,
    cfg: &DistfitConfig,
    what: &str,
) -> Result<(f64, bool, usize)> {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut last_step = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        let (g, dg) = f(x);
        if !g.is_finite() || !dg.is_finite() {
            return Err(Error::Numerical(format!("{what}: non-finite score at {x}")));
        }
        if g.abs() < cfg.gradient_tolerance {
            return Ok((x, true, it));
        }
        if (g > 0.0) == increasing {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let mut next = x - g / dg;
        if !(next > lo && next < hi) || dg == 0.0 {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(lo) };
        }
        last_step = (next - x).abs();
        if last_step <= 4.0 * f64::EPSILON * x.abs() {
            return Ok((next, g.abs() < 1e-6, it));
        }
        x = next;
    }
    Err(Error::Numerical(format!(
        "{what}: no convergence in {} iterations (last step {last_step:e})",
        cfg.max_iterations
    )))
}

fn fit_weibull(x: &[f64], cfg: &DistfitConfig) -> Result<Solved> {
    let m = stats::mean(x);
    let sd = stats::std_dev(x);
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("weibull fit input".into()));
    }
    let top = x.iter().fold(0.0f64, |a, &b| a.max(b));
    let y: Vec<f64> = x.iter().map(|v| v / top).collect();
    let mean_ln = y.iter().map(|v| v.ln()).sum::<f64>() / y.len() as f64;
    // moment-matching start from the coefficient of variation
    let k0 = (sd / m).powf(-1.086).clamp(0.05, 50.0);
    let (k, converged, iterations) =
        newton_positive(k0, |k| weibull_score(&y, mean_ln, k), true, cfg, "weibull shape")?;
    let mean_pow = y.iter().map(|v| v.powf(k)).sum::<f64>() / y.len() as f64;
    let scale = top * mean_pow.powf(1.0 / k);
    Ok(Solved {
        dist: Distribution::Weibull { shape: k, scale },
        converged,
        iterations,
    })
}

fn fit_gamma(x: &[f64], cfg: &DistfitConfig) -> Result<Solved> {
    let m = stats::mean(x);
    let var = stats::variance(x);
    let s = m.ln() - x.iter().map(|v| v.ln()).sum::<f64>() / x.len() as f64;
    if !(var > 0.0) || !(s > 0.0) {
        return Err(Error::ZeroVariance("gamma fit input".into()));
    }
    let a0 = m * m / var;
    let (shape, converged, iterations) = newton_positive(
        a0,
        |a| (a.ln() - digamma(a) - s, 1.0 / a - stats::trigamma(a)),
        false,
        cfg,
        "gamma shape",
    )?;
    Ok(Solved {
        dist: Distribution::Gamma {
            shape,
            rate: shape / m,
        },
        converged,
        iterations,
    })
}

/// Hosking's probability-weighted-moment estimates `(μ, σ, ξ)`.
pub fn gev_pwm(values: &[f64]) -> (f64, f64, f64) {
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let i = i as f64;
        b0 += v;
        b1 += v * i / (n - 1.0);
        b2 += v * i * (i - 1.0) / ((n - 1.0) * (n - 2.0));
    }
    b0 /= n;
    b1 /= n;
    b2 /= n;
    let c = (2.0 * b1 - b0) / (3.0 * b2 - b0) - 2f64.ln() / 3f64.ln();
    let k = 7.8590 * c + 2.9554 * c * c;
    if k.abs() < 1e-6 {
        let sigma = (2.0 * b1 - b0) / 2f64.ln();
        return (b0 - 0.577_215_664_901_532_9 * sigma, sigma, 0.0);
    }
    let g = gamma(1.0 + k);
    let sigma = (2.0 * b1 - b0) * k / ((1.0 - 2f64.powf(-k)) * g);
    let mu = b0 + sigma * (g - 1.0) / k;
    (mu, sigma, -k)
}

/// Mean negative log-likelihood and its gradient in `(μ, ln σ, ξ)`.
pub fn gev_objective(x: &[f64], p: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
    let (mu, sigma, xi) = (p[0], p[1].exp(), p[2]);
    if !sigma.is_finite() || sigma <= 0.0 {
        return None;
    }
    let (mut l, mut dz_sum, mut zdz_sum, mut dxi) = (0.0, 0.0, 0.0, 0.0);
    for &v in x {
        let z = (v - mu) / sigma;
        let w = xi * z;
        if w <= -1.0 {
            return None;
        }
        let t = 1.0 + w;
        let l1 = w.ln_1p();
        let a = z * ln1p_over(w);
        let e = (-a).exp();
        l += -l1 - a - e;
        let dz = (e - 1.0 - xi) / t;
        dz_sum += dz;
        zdz_sum += z * dz;
        dxi += -z / t + z * z * gev_g(w) * (1.0 - e);
    }
    let n = x.len() as f64;
    let ll = l / n - sigma.ln();
    let grad = Vector3::new(dz_sum / (n * sigma), 1.0 + zdz_sum / n, -dxi / n);
    ll.is_finite().then_some((-ll, grad))
}

fn fit_gev(x: &[f64], cfg: &DistfitConfig) -> Result<Solved> {
    let (mu0, s0, xi0) = gev_pwm(x);
    let sd = stats::std_dev(x);
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("gev fit input".into()));
    }
    let mut start = Vector3::new(mu0, s0.max(1e-3 * sd).ln(), xi0.clamp(-0.9, 0.9));
    if gev_objective(x, &start).is_none() {
        // PWM start outside the support of some sample: begin from Gumbel
        let sigma = sd * 6f64.sqrt() / std::f64::consts::PI;
        start = Vector3::new(stats::mean(x) - 0.5772 * sigma, sigma.ln(), 0.0);
    }
    let (p, converged, iterations) = bfgs(|p| gev_objective(x, p), start, cfg)?;
    Ok(Solved {
        dist: Distribution::Gev {
            location: p[0],
            scale: p[1].exp(),
            shape: p[2],
        },
        converged,
        iterations,
    })
}

/// Quasi-Newton minimization with backtracking line search. `f` returns
/// `None` outside its domain.
pub fn bfgs(
    f: impl Fn(&Vector3<f64>) -> Option<(f64, Vector3<f64>)>,
    start: Vector3<f64>,
    cfg: &DistfitConfig,
) -> Result<(Vector3<f64>, bool, usize)> {
    let mut x = start;
    let (mut fx, mut g) =
        f(&x).ok_or_else(|| Error::Numerical("gev: starting point outside the support".into()))?;
    let mut h = Matrix3::<f64>::identity();
    for it in 1..=cfg.max_iterations {
        let gnorm = g.amax();
        if gnorm < cfg.gradient_tolerance {
            return Ok((x, true, it));
        }
        let mut d = -(h * g);
        if d.dot(&g) >= 0.0 {
            h = Matrix3::identity();
            d = -g;
        }
        let slope = d.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = x + d * step;
            if let Some((fn_, gn)) = f(&xn) {
                // near the optimum f changes below its rounding error, so a
                // smaller gradient is accepted as progress there
                let flat = (fn_ - fx).abs() <= 1e-13 * fx.abs().max(1.0) && gn.amax() < gnorm;
                if xn != x && (fn_ <= fx + 1e-4 * step * slope || flat) {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if gnorm < 1e-6 {
                return Ok((x, false, it));
            }
            return Err(Error::Numerical(format!(
                "gev: line search failed with gradient {gnorm:e}"
            )));
        };
        let s = xn - x;
        let y = gn - g;
        let sy = s.dot(&y);
        if sy > 1e-16 {
            let rho = 1.0 / sy;
            let i = Matrix3::identity();
            h = (i - s * y.transpose() * rho) * h * (i - y * s.transpose() * rho) + s * s.transpose() * rho;
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    Err(Error::Numerical(format!(
        "gev: no convergence in {} iterations",
        cfg.max_iterations
    )))
}

fn check_sample(values: &[f64]) -> Result<()> {
    ensure!(
        values.len() >= MIN_SAMPLES,
        "distribution fits need at least {MIN_SAMPLES} samples, got {}",
        values.len()
    );
    ensure!(values.iter().all(|v| v.is_finite()), "non-finite sample in fit input");
    Ok(())
}

pub fn fit_values(values: &[f64], family: Family, cfg: &DistfitConfig) -> Result<DistFit> {
    check_sample(values)?;
    let (data, shifted_zeros, solved) = match family {
        Family::Weibull | Family::Gamma => {
            let (data, zeros) = positive_support(values, family, cfg.zero_shift)?;
            let solved = if family == Family::Weibull {
                fit_weibull(&data, cfg)?
            } else {
                fit_gamma(&data, cfg)?
            };
            (data, zeros, solved)
        }
        Family::Gev => (values.to_vec(), 0, fit_gev(values, cfg)?),
    };
    solved.dist.validate()?;
    let loglik = solved.dist.loglik(&data);
    if !loglik.is_finite() {
        return Err(Error::Numerical(format!("{family}: non-finite log-likelihood at the optimum")));
    }
    Ok(DistFit {
        distribution: solved.dist,
        loglik,
        n: values.len(),
        shifted_zeros,
        converged: solved.converged,
        iterations: solved.iterations,
        kl: None,
    })
}

pub fn fit_distribution(ts: &TimeSeries, family: Family, cfg: &DistfitConfig) -> Result<DistFit> {
    fit_values(&ts.values, family, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub family: Family,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub label: String,
    pub n: usize,
    pub n_bins: usize,
    pub bin_rule: BinRule,
    /// Sorted ascending by divergence.
    pub fits: Vec<DistFit>,
    pub failures: Vec<FitFailure>,
}

impl Ranking {
    pub fn best(&self) -> &DistFit {
        &self.fits[0]
    }
}

/// Ascending KL, then higher log-likelihood, then family name.
pub fn rank_order(fits: &mut [DistFit]) {
    fits.sort_by(|a, b| {
        a.kl_value()
            .total_cmp(&b.kl_value())
            .then(b.loglik.total_cmp(&a.loglik))
            .then(a.family().name().cmp(b.family().name()))
    });
}

pub fn rank_distributions(ts: &TimeSeries, cfg: &DistfitConfig) -> Result<Ranking> {
    let density = empirical_density(&ts.values, cfg.n_bins)?;
    let outcomes: Vec<(Family, Result<DistFit>)> = Family::ALL
        .par_iter()
        .map(|&family| {
            let fit = fit_values(&ts.values, family, cfg).and_then(|mut fit| {
                fit.kl = Some(kl_from_density(&density, &fit.distribution)?);
                Ok(fit)
            });
            (family, fit)
        })
        .collect();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for (family, outcome) in outcomes {
        match outcome {
            Ok(f) => fits.push(f),
            Err(e) => failures.push(FitFailure {
                family,
                message: e.to_string(),
            }),
        }
    }
    if fits.is_empty() {
        let detail: Vec<String> = failures.iter().map(|f| format!("{}: {}", f.family, f.message)).collect();
        return Err(Error::Numerical(format!(
            "no distribution could be fitted to `{}` ({})",
            ts.label,
            detail.join("; ")
        )));
    }
    rank_order(&mut fits);
    Ok(Ranking {
        label: ts.label.clone(),
        n: ts.len(),
        n_bins: density.n_bins(),
        bin_rule: density.rule,
        fits,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableCell {
    pub params: BTreeMap<String, f64>,
    /// Nats; `null` in JSON when infinite.
    pub kl: Option<f64>,
    pub kl_flag: KlFlag,
    pub loglik: f64,
    pub converged: bool,
    pub lowest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub label: String,
    pub n: usize,
    pub n_bins: usize,
    pub bin_rule: BinRule,
    pub shifted_zeros: usize,
    pub best: Family,
    /// Keyed by family name.
    pub cells: BTreeMap<String, TableCell>,
    pub failures: Vec<FitFailure>,
}

/// Rows are series, columns families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistfitTable {
    pub log_base: String,
    pub rows: Vec<TableRow>,
}

impl TableRow {
    pub fn from_ranking(r: &Ranking) -> Self {
        let best = r.best().family();
        let cells = r
            .fits
            .iter()
            .map(|f| {
                let kl = f.kl.as_ref().expect("ranked fits carry a divergence");
                (
                    f.family().name().to_string(),
                    TableCell {
                        params: f.distribution.params(),
                        kl: kl.value.is_finite().then_some(kl.value),
                        kl_flag: kl.flag,
                        loglik: f.loglik,
                        converged: f.converged,
                        lowest: f.family() == best,
                    },
                )
            })
            .collect();
        Self {
            label: r.label.clone(),
            n: r.n,
            n_bins: r.n_bins,
            bin_rule: r.bin_rule,
            shifted_zeros: r.fits.iter().map(|f| f.shifted_zeros).max().unwrap_or(0),
            best,
            cells,
            failures: r.failures.clone(),
        }
    }
}

impl DistfitTable {
    pub fn new(rankings: &[Ranking]) -> Self {
        Self {
            log_base: "e".into(),
            rows: rankings.iter().map(TableRow::from_ranking).collect(),
        }
    }
}
