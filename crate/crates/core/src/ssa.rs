//! Singular spectrum analysis in the Toeplitz (lagged-correlation) variant.
//!
//! The series is embedded with window `M`, the `M x M` Toeplitz matrix of
//! lagged correlations is diagonalized, and each eigenvector yields a
//! principal component (projection of the lagged vectors) and a reconstructed
//! component (diagonal average of the PC/eigenvector outer product). The
//! reconstructed components sum to the input at every index.
//!
//! By default the series mean is removed before the correlations are formed
//! and added back to the first reconstructed component, which then carries
//! the level of the series along with its trend.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::series::TimeSeries;
use crate::stats;

pub const DEFAULT_EXPONENT: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaConfig {
    /// Embedding window `M`, `1 < M < N`.
    pub window: usize,
    /// Exponent of the window rule the window came from, kept for reports.
    pub exponent: f64,
    /// Remove the mean before forming lagged correlations.
    pub centered: bool,
    /// Number of leading components to reconstruct; `None` for all `M`.
    pub components: Option<usize>,
}

impl SsaConfig {
    /// Window from [`default_window`], all components, centered.
    pub fn for_length(n: usize, exponent: f64) -> Result<Self> {
        Ok(Self {
            window: default_window(n, exponent)?,
            exponent,
            centered: true,
            components: None,
        })
    }

    pub fn with_window(window: usize) -> Self {
        Self {
            window,
            exponent: f64::NAN,
            centered: true,
            components: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaDecomposition {
    pub window: usize,
    pub centered: bool,
    /// Mean removed before decomposition (zero when uncentered).
    pub mean: f64,
    /// Descending, negatives clamped to zero.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` is the k-th eigenvector, length `window`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub variance_fractions: Vec<f64>,
    /// How many negative eigenvalues were clamped, and the most negative one.
    pub clamped: usize,
    pub most_negative: f64,
    /// Principal components, each of length `N - M + 1`.
    pub pcs: Vec<Vec<f64>>,
    /// Reconstructed components, each of length `N`.
    pub rcs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSplit {
    pub trend: TimeSeries,
    pub residual: TimeSeries,
    /// One-based component indices summed into the trend.
    pub selected: Vec<usize>,
}

/// Window length `round((ln N)^c)`, clamped to `[2, N/5]`.
pub fn default_window(n: usize, c: f64) -> Result<usize> {
    ensure!(n >= 8, "window rule needs N >= 8, got {n}");
    ensure!((1.5..=2.5).contains(&c), "window exponent must lie in [1.5, 2.5], got {c}");
    let m = (n as f64).ln().powf(c).round() as usize;
    Ok(m.clamp(2, (n / 5).max(2)))
}

/// Lag-`k` correlations `(1/(N-k)) Σ x_m x_{m+k}` for `k < m`.
fn lag_correlations(x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    (0..m)
        .map(|k| {
            let s: f64 = x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum();
            s / (n - k) as f64
        })
        .collect()
}

fn prepared(values: &[f64], centered: bool) -> (Vec<f64>, f64) {
    if centered {
        let mean = stats::mean(values);
        (values.iter().map(|v| v - mean).collect(), mean)
    } else {
        (values.to_vec(), 0.0)
    }
}

/// The `M x M` symmetric Toeplitz lagged-correlation matrix.
pub fn toeplitz_correlation(values: &[f64], m: usize, centered: bool) -> Result<DMatrix<f64>> {
    ensure!(m >= 2 && m < values.len(), "window {m} must satisfy 1 < M < N = {}", values.len());
    let (x, _) = prepared(values, centered);
    let lags = lag_correlations(&x, m);
    Ok(DMatrix::from_fn(m, m, |i, j| lags[i.abs_diff(j)]))
}

/// Flips `v` so its first entry of non-negligible size is positive.
fn normalize_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-9 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// `a[i] = Σ_j x[i + j] e[j]`.
fn principal_component(x: &[f64], e: &[f64]) -> Vec<f64> {
    let k = x.len() - e.len() + 1;
    (0..k)
        .map(|i| x[i..i + e.len()].iter().zip(e).map(|(a, b)| a * b).sum())
        .collect()
}

/// Diagonal averaging of the rank-one matrix `e aᵀ`.
fn reconstruct(a: &[f64], e: &[f64], n: usize) -> Vec<f64> {
    let m = e.len();
    let k = a.len();
    (0..n)
        .map(|t| {
            let lo = (t + 1).saturating_sub(k);
            let hi = t.min(m - 1);
            let s: f64 = (lo..=hi).map(|j| a[t - j] * e[j]).sum();
            s / (hi - lo + 1) as f64
        })
        .collect()
}

pub fn decompose(ts: &TimeSeries, cfg: &SsaConfig) -> Result<SsaDecomposition> {
    let n = ts.len();
    let m = cfg.window;
    ensure!(m >= 2 && m < n, "window {m} must satisfy 1 < M < N = {n}");
    let wanted = cfg.components.unwrap_or(m);
    ensure!(wanted >= 1 && wanted <= m, "component count {wanted} outside 1..={m}");

    let (x, mean) = prepared(&ts.values, cfg.centered);
    let lags = lag_correlations(&x, m);
    let c = DMatrix::from_fn(m, m, |i, j| lags[i.abs_diff(j)]);
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical(format!("eigensolver did not converge for M = {m}")))?;

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..m)
        .map(|k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            normalize_sign(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let most_negative = pairs.iter().map(|p| p.0).fold(0.0f64, f64::min);
    let clamped = pairs.iter().filter(|p| p.0 < 0.0).count();
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0.max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical(format!(
            "series `{}` has no variance to decompose",
            ts.label
        )));
    }
    let variance_fractions = eigenvalues.iter().map(|l| l / total).collect();
    let eigenvectors: Vec<Vec<f64>> = pairs.into_iter().map(|p| p.1).collect();

    let (pcs, mut rcs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = eigenvectors[..wanted]
        .par_iter()
        .map(|e| {
            let a = principal_component(&x, e);
            let r = reconstruct(&a, e, n);
            (a, r)
        })
        .unzip();
    if mean != 0.0 {
        rcs[0].iter_mut().for_each(|v| *v += mean);
    }

    Ok(SsaDecomposition {
        window: m,
        centered: cfg.centered,
        mean,
        eigenvalues,
        eigenvectors,
        variance_fractions,
        clamped,
        most_negative,
        pcs,
        rcs,
    })
}

/// Sums the selected (one-based) components into a trend; the residual is the
/// original minus that trend.
pub fn split_trend(dec: &SsaDecomposition, selected: &[usize], original: &TimeSeries) -> Result<TrendSplit> {
    ensure!(!selected.is_empty(), "no trend components selected");
    for &k in selected {
        ensure!(
            k >= 1 && k <= dec.rcs.len(),
            "component {k} outside the reconstructed range 1..={}",
            dec.rcs.len()
        );
    }
    let n = original.len();
    ensure!(
        dec.rcs[0].len() == n,
        "decomposition length {} does not match series length {n}",
        dec.rcs[0].len()
    );
    let mut trend = vec![0.0; n];
    for &k in selected {
        trend.iter_mut().zip(&dec.rcs[k - 1]).for_each(|(t, r)| *t += r);
    }
    let residual: Vec<f64> = original.values.iter().zip(&trend).map(|(x, t)| x - t).collect();
    Ok(TrendSplit {
        trend: original.with_values(format!("{}-trend", original.label), trend),
        residual: original.with_values(format!("{}-residual", original.label), residual),
        selected: selected.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, rng_from_seed, white, GeneratorSpec, SignalKind};

    /// Cyclic Jacobi eigenvalue iteration, returning (values, column vectors).
    fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = a.len();
        let mut a = a.to_vec();
        let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut() {
                        let (vp, vq) = (row[p], row[q]);
                        row[p] = c * vp - s * vq;
                        row[q] = s * vp + c * vq;
                    }
                }
            }
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
        let vals = idx.iter().map(|&i| a[i][i]).collect();
        let vecs = idx
            .iter()
            .map(|&i| {
                let mut col: Vec<f64> = (0..n).map(|r| v[r][i]).collect();
                normalize_sign(&mut col);
                col
            })
            .collect();
        (vals, vecs)
    }

    /// Literal double-loop lagged correlation with one-based indices.
    fn brute_toeplitz(x: &[f64], m: usize) -> Vec<Vec<f64>> {
        let n = x.len();
        let mut c = vec![vec![0.0; m]; m];
        for i in 1..=m {
            for j in 1..=m {
                let lag = i.abs_diff(j);
                let mut s = 0.0;
                for t in 1..=(n - lag) {
                    s += x[t - 1] * x[t - 1 + lag];
                }
                c[i - 1][j - 1] = s / (n - lag) as f64;
            }
        }
        c
    }

    fn noisy(n: usize, seed: u64) -> TimeSeries {
        let w = white(&mut rng_from_seed(seed), n);
        let v = (0..n)
            .map(|i| 0.02 * i as f64 + (i as f64 / 9.0).sin() + 0.5 * w[i])
            .collect();
        TimeSeries::new("s", 1.0, v).unwrap()
    }

    #[test]
    fn window_rule() {
        assert_eq!(default_window(100, 1.5).unwrap(), 10);
        assert_eq!(default_window(10, 2.5).unwrap(), 2);
        // About 62.5 days of one-minute samples.
        assert_eq!(default_window(89_977, 2.5).unwrap(), 439);
        assert_eq!(default_window(89_978, 2.5).unwrap(), 440);
        assert!(default_window(7, 2.0).is_err());
        assert!(default_window(100, 3.0).is_err());
    }

    #[test]
    fn toeplitz_examples() {
        let s = noisy(300, 1);
        let c = toeplitz_correlation(&s.values, 6, true).unwrap();
        let mean = stats::mean(&s.values);
        let lag0: f64 = s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 300.0;
        for i in 0..6 {
            assert!((c[(i, i)] - lag0).abs() < 1e-12 * lag0);
        }
        let alt: Vec<f64> = (0..101).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let c = toeplitz_correlation(&alt, 3, false).unwrap();
        let oracle = brute_toeplitz(&alt, 3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((c[(i, j)] - oracle[i][j]).abs() < 1e-14);
            }
        }
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(0, 1)], -1.0);
        assert!(toeplitz_correlation(&alt, 101, false).is_err());

        let n = 10_000;
        let w = white(&mut rng_from_seed(9), n);
        let c = toeplitz_correlation(&w, 20, true).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                if i != j {
                    assert!(c[(i, j)].abs() < 3.0 / (n as f64).sqrt());
                }
            }
        }
    }

    #[test]
    fn matches_brute_force_equations() {
        for (n, m, seed) in [(60usize, 4usize, 1u64), (150, 7, 2), (200, 10, 3)] {
            let s = noisy(n, seed);
            let dec = decompose(&s, &SsaConfig::with_window(m)).unwrap();
            let mean = stats::mean(&s.values);
            let x: Vec<f64> = s.values.iter().map(|v| v - mean).collect();
            let (vals, vecs) = jacobi_eigen(&brute_toeplitz(&x, m));
            let k_len = n - m + 1;
            for k in 0..m {
                assert!((vals[k].max(0.0) - dec.eigenvalues[k]).abs() < 1e-9 * vals[0]);
                // principal component a_ik = Σ_j x_{i+j} E_jk
                let mut a = vec![0.0; k_len];
                for i in 0..k_len {
                    for j in 0..m {
                        a[i] += x[i + j] * vecs[k][j];
                    }
                }
                for i in 0..k_len {
                    assert!((a[i] - dec.pcs[k][i]).abs() < 1e-9, "pc {k} at {i}");
                }
                // reconstruction: average over every (i, j) with i + j = t
                for t in 0..n {
                    let (mut s_, mut cnt) = (0.0, 0);
                    for j in 0..m {
                        if t >= j && t - j < k_len {
                            s_ += a[t - j] * vecs[k][j];
                            cnt += 1;
                        }
                    }
                    let mut expect = s_ / cnt as f64;
                    if k == 0 {
                        expect += mean;
                    }
                    assert!((expect - dec.rcs[k][t]).abs() < 1e-9, "rc {k} at {t}");
                    // interior points: literal (1/M) Σ_j a_{t-j} E_j
                    if t + 1 >= m && t < k_len {
                        assert_eq!(cnt, m);
                        let literal: f64 = (0..m).map(|j| a[t - j] * vecs[k][j]).sum::<f64>() / m as f64
                            + if k == 0 { mean } else { 0.0 };
                        assert!((literal - dec.rcs[k][t]).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn completeness_and_orthonormality() {
        for n in [100usize, 1000, 10_000] {
            for m in [5usize, 20, 100] {
                if m >= n {
                    continue;
                }
                let s = noisy(n, (n + m) as u64);
                let dec = decompose(&s, &SsaConfig::with_window(m)).unwrap();
                for t in 0..n {
                    let sum: f64 = dec.rcs.iter().map(|r| r[t]).sum();
                    assert!((sum - s.values[t]).abs() < 1e-8, "n {n} m {m} t {t}");
                }
                for a in 0..m {
                    for b in 0..m {
                        let dot: f64 = dec.eigenvectors[a].iter().zip(&dec.eigenvectors[b]).map(|(x, y)| x * y).sum();
                        assert!((dot - f64::from(a == b)).abs() < 1e-8);
                    }
                }
                assert!(dec.variance_fractions.windows(2).all(|w| w[0] >= w[1]));
                assert!((dec.variance_fractions.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                assert!(dec.most_negative >= -1e-10 * dec.eigenvalues[0] || dec.clamped > 0);
            }
        }
    }

    #[test]
    fn sinusoid_occupies_one_pair() {
        let s = generate(&GeneratorSpec::new(
            SignalKind::Tone {
                period: 64.0,
                amplitude: 1.0,
            },
            4096,
            0,
        ))
        .unwrap();
        let dec = decompose(
            &s,
            &SsaConfig {
                components: Some(2),
                ..SsaConfig::with_window(256)
            },
        )
        .unwrap();
        assert!(dec.variance_fractions[0] + dec.variance_fractions[1] > 0.99);
        assert!(dec.variance_fractions[2..].iter().all(|f| *f < 1e-3));
        assert_eq!(dec.rcs.len(), 2);
    }

    #[test]
    fn ramp_trend_captured_by_first_component() {
        let n = 4000;
        let w = white(&mut rng_from_seed(5), n);
        let ramp: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let sd = stats::std_dev(&ramp);
        let v: Vec<f64> = ramp.iter().zip(&w).map(|(r, e)| r + sd / 100.0 * e).collect();
        let s = TimeSeries::new("ramp", 1.0, v).unwrap();
        let cfg = SsaConfig {
            components: Some(1),
            ..SsaConfig::for_length(n, 2.5).unwrap()
        };
        let dec = decompose(&s, &cfg).unwrap();
        assert!(stats::pearson(&dec.rcs[0], &ramp) > 0.999);
    }

    #[test]
    fn white_noise_spectrum_is_flat() {
        let n = 100_000;
        let w = white(&mut rng_from_seed(17), n);
        let s = TimeSeries::new("w", 1.0, w).unwrap();
        let dec = decompose(
            &s,
            &SsaConfig {
                components: Some(1),
                ..SsaConfig::with_window(50)
            },
        )
        .unwrap();
        let ratio = dec.eigenvalues[0] / dec.eigenvalues[49];
        assert!(ratio < 3.0, "ratio {ratio}");
    }

    #[test]
    fn split_examples() {
        let s = noisy(500, 4);
        let dec = decompose(&s, &SsaConfig::with_window(30)).unwrap();
        let all: Vec<usize> = (1..=30).collect();
        let split = split_trend(&dec, &all, &s).unwrap();
        assert!(split.residual.values.iter().all(|r| r.abs() < 1e-8));
        let split = split_trend(&dec, &[1], &s).unwrap();
        for ((t, r), x) in split.trend.values.iter().zip(&split.residual.values).zip(&s.values) {
            assert!((t + r - x).abs() <= 1e-10);
        }
        assert!(split_trend(&dec, &[], &s).is_err());
        assert!(split_trend(&dec, &[31], &s).is_err());
        assert!(split_trend(&dec, &[0], &s).is_err());
    }

    #[test]
    fn residual_keeps_the_oscillation() {
        use crate::spectral::{lpsd, LpsdConfig};
        let n = 4096;
        let w = white(&mut rng_from_seed(23), n);
        let osc: Vec<f64> = (0..n)
            .map(|i| 2.0 * (2.0 * std::f64::consts::PI * i as f64 / 50.0).sin() + 0.2 * w[i])
            .collect();
        let v: Vec<f64> = osc.iter().enumerate().map(|(i, o)| 0.01 * i as f64 + o).collect();
        let s = TimeSeries::new("rsn", 1.0, v).unwrap();
        let cfg = SsaConfig {
            components: Some(1),
            ..SsaConfig::for_length(n, 2.5).unwrap()
        };
        let dec = decompose(&s, &cfg).unwrap();
        let split = split_trend(&dec, &[1], &s).unwrap();
        let pcfg = LpsdConfig::default();
        let reference = lpsd(&s.with_values("osc", osc), &pcfg).unwrap();
        let got = lpsd(&split.residual, &pcfg).unwrap();
        let peak = reference
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((reference.frequencies[peak] * 50.0 - 1.0).abs() < 0.05);
        let rel = (got.power[peak] / reference.power[peak] - 1.0).abs();
        assert!(rel < 0.05, "peak power changed by {rel}");
    }
}
