//! Uniformly sampled series, increments, magnitude/sign decomposition and
//! Pearson correlation matrices.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::stats;

/// A gap-free, uniformly sampled scalar record.
///
/// `dt` is in minutes and `t0` is the UTC epoch second of the first sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub label: String,
    #[serde(default)]
    pub unit: String,
    pub dt: f64,
    #[serde(default)]
    pub t0: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, dt: f64, values: Vec<f64>) -> Result<Self> {
        ensure!(dt.is_finite() && dt > 0.0, "sampling interval must be positive, got {dt}");
        ensure!(!values.is_empty(), "time series must not be empty");
        ensure!(
            values.iter().all(|v| v.is_finite()),
            "time series contains non-finite values"
        );
        Ok(Self {
            label: label.into(),
            unit: String::new(),
            dt,
            t0: 0.0,
            values,
        })
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same metadata, new samples.
    pub fn with_values(&self, label: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            unit: self.unit.clone(),
            dt: self.dt,
            t0: self.t0,
            values,
        }
    }

    /// Epoch seconds of sample `i`.
    pub fn time_of(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt * 60.0
    }
}

/// First differences of a series; one shorter than its parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementSeries {
    pub parent_label: String,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl IncrementSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Magnitude and sign of an increment series. `magnitude[i] * sign[i]`
/// reproduces the increment bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagSignPair {
    pub magnitude: Vec<f64>,
    pub sign: Vec<i8>,
}

impl MagSignPair {
    pub fn sign_as_f64(&self) -> Vec<f64> {
        self.sign.iter().map(|&s| f64::from(s)).collect()
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        self.magnitude
            .iter()
            .zip(&self.sign)
            .map(|(m, &s)| m * f64::from(s))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// Row-major, `labels.len()` squared entries.
    pub r: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[i][j]
    }

    /// Smallest off-diagonal coefficient, or `None` for a single series.
    pub fn min_off_diagonal(&self) -> Option<f64> {
        let n = self.labels.len();
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.r[i][j])
            .reduce(f64::min)
    }
}

/// Non-overlapping window means. The trailing partial window is dropped.
pub fn resample_mean(ts: &TimeSeries, window: f64) -> Result<TimeSeries> {
    ensure!(
        window.is_finite() && window >= ts.dt,
        "resampling window {window} min is shorter than the sampling interval {} min",
        ts.dt
    );
    let ratio = window / ts.dt;
    let per = ratio.round();
    ensure!(
        (ratio - per).abs() <= 1e-9 * ratio,
        "resampling window {window} min is not a multiple of dt = {} min",
        ts.dt
    );
    let per = per as usize;
    let values: Vec<f64> = ts
        .values
        .chunks_exact(per)
        .map(|chunk| chunk.iter().sum::<f64>() / per as f64)
        .collect();
    ensure!(
        !values.is_empty(),
        "series of {} samples is shorter than one resampling window",
        ts.len()
    );
    Ok(TimeSeries {
        label: ts.label.clone(),
        unit: ts.unit.clone(),
        dt: window,
        t0: ts.t0,
        values,
    })
}

pub fn increments(ts: &TimeSeries) -> Result<IncrementSeries> {
    ensure!(
        ts.len() >= 2,
        "increments need at least 2 samples, `{}` has {}",
        ts.label,
        ts.len()
    );
    Ok(IncrementSeries {
        parent_label: ts.label.clone(),
        dt: ts.dt,
        values: differences(&ts.values),
    })
}

pub(crate) fn differences(xs: &[f64]) -> Vec<f64> {
    xs.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Running sum, the inverse of [`increments`] up to the first sample.
pub fn cumulative_sum(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Splits each increment into `|Δx|` and `sgn(Δx)` with `sgn(0) = 0`.
pub fn mag_sign(inc: &IncrementSeries) -> MagSignPair {
    mag_sign_values(&inc.values)
}

pub fn mag_sign_values(values: &[f64]) -> MagSignPair {
    let magnitude = values.iter().map(|v| v.abs()).collect();
    let sign = values
        .iter()
        .map(|&v| {
            if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect();
    MagSignPair { magnitude, sign }
}

pub fn pearson_matrix(series: &[TimeSeries]) -> Result<CorrelationMatrix> {
    ensure!(!series.is_empty(), "correlation matrix needs at least one series");
    let n = series[0].len();
    ensure!(n >= 2, "correlation needs at least 2 samples per series");
    for s in series {
        ensure!(
            s.len() == n,
            "series `{}` has {} samples, expected {n}",
            s.label,
            s.len()
        );
        if stats::variance(&s.values) <= 0.0 {
            return Err(Error::ZeroVariance(s.label.clone()));
        }
    }
    let k = series.len();
    let mut r = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let c = stats::pearson(&series[i].values, &series[j].values);
            r[i][j] = c;
            r[j][i] = c;
        }
    }
    Ok(CorrelationMatrix {
        labels: series.iter().map(|s| s.label.clone()).collect(),
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new("x", 1.0, values).unwrap()
    }

    #[test]
    fn resample_pairs() {
        let out = resample_mean(&ts(vec![1.0, 2.0, 3.0, 4.0]), 2.0).unwrap();
        assert_eq!(out.values, vec![1.5, 3.5]);
        assert_eq!(out.dt, 2.0);
        let out = resample_mean(&ts(vec![1.0, 2.0, 3.0, 4.0, 5.0]), 2.0).unwrap();
        assert_eq!(out.values, vec![1.5, 3.5]);
    }

    #[test]
    fn resample_twenty_hertz_to_minutes() {
        let raw: Vec<f64> = (0..1200).map(|i| ((i * 7919) % 113) as f64 * 0.1).collect();
        let src = TimeSeries::new("hf", 0.05, raw.clone()).unwrap();
        let out = resample_mean(&src, 1.0).unwrap();
        assert_eq!(out.len(), 60);
        for (w, got) in out.values.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..20 {
                acc += raw[w * 20 + i];
            }
            assert!((got - acc / 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_rejects_bad_windows() {
        let s = ts(vec![1.0; 10]);
        assert!(resample_mean(&s, 1.5).is_err());
        assert!(resample_mean(&s, 0.5).is_err());
        assert!(resample_mean(&s, 20.0).is_err());
    }

    #[test]
    fn increments_examples() {
        assert_eq!(increments(&ts(vec![1.0, 3.0, 2.0])).unwrap().values, vec![2.0, -1.0]);
        assert_eq!(increments(&ts(vec![5.0; 4])).unwrap().values, vec![0.0; 3]);
        let ramp: Vec<f64> = (0..100).map(|i| 0.5 * i as f64).collect();
        let inc = increments(&ts(ramp)).unwrap();
        assert_eq!(inc.len(), 99);
        assert!(inc.values.iter().all(|&v| v == 0.5));
        assert!(increments(&ts(vec![1.0])).is_err());
    }

    #[test]
    fn mag_sign_examples() {
        let p = mag_sign_values(&[2.0, -1.0, 0.0]);
        assert_eq!(p.magnitude, vec![2.0, 1.0, 0.0]);
        assert_eq!(p.sign, vec![1, -1, 0]);
        let p = mag_sign_values(&[0.1, 3.0, 7.5]);
        assert!(p.sign.iter().all(|&s| s == 1));
        // ±1 input
        let pm: Vec<f64> = (0..1000u32)
            .map(|i| if (i.wrapping_mul(2654435761) >> 7) & 1 == 0 { 1.0 } else { -1.0 })
            .collect();
        let p = mag_sign_values(&pm);
        assert!(p.magnitude.iter().all(|&m| m == 1.0));
        assert_eq!(p.sign_as_f64(), pm);
    }

    #[test]
    fn negative_zero_has_zero_sign() {
        let p = mag_sign_values(&[-0.0]);
        assert_eq!(p.sign, vec![0]);
        assert_eq!(p.reconstruct()[0], 0.0);
    }

    #[test]
    fn pearson_examples() {
        let x = ts(vec![1.0, 2.0, 3.0, 4.0]);
        let mut neg = x.clone();
        neg.values.iter_mut().for_each(|v| *v = -*v);
        let y = ts(vec![1.0, 2.0, 3.0, 5.0]);
        let m = pearson_matrix(&[x.clone(), x.clone(), neg, y]).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert!((m.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((m.get(0, 2) + 1.0).abs() < 1e-15);
        // Hand formula: dx = [-1.5,-.5,.5,1.5], dy = [-1.75,-.75,.25,2.25]
        // sxy = 6.5, sxx = 5, syy = 8.75
        let expected = 6.5 / (5.0f64 * 8.75).sqrt();
        assert!((m.get(0, 3) - expected).abs() < 1e-14);
        assert_eq!(m.get(3, 0), m.get(0, 3));
    }

    #[test]
    fn pearson_errors() {
        let a = ts(vec![1.0, 2.0, 3.0]);
        let b = ts(vec![1.0, 2.0]);
        assert!(pearson_matrix(&[a.clone(), b]).is_err());
        let mut c = TimeSeries::new("flat", 1.0, vec![2.0; 3]).unwrap();
        c.label = "flat".into();
        match pearson_matrix(&[a, c]) {
            Err(Error::ZeroVariance(label)) => assert_eq!(label, "flat"),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn mag_sign_reconstructs_exactly(v in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let p = mag_sign_values(&v);
            for (i, r) in p.reconstruct().into_iter().enumerate() {
                prop_assert_eq!(r, v[i]);
                prop_assert_eq!(p.sign[i] == 0, v[i] == 0.0);
            }
        }

        #[test]
        fn resample_preserves_mean(v in prop::collection::vec(-1e3f64..1e3, 4..300), per in 1usize..4) {
            let s = ts(v.clone());
            let out = resample_mean(&s, per as f64).unwrap();
            let used = out.len() * per;
            let m_in = stats::mean(&v[..used]);
            let m_out = stats::mean(&out.values);
            prop_assert!((m_in - m_out).abs() <= 1e-12 * m_in.abs().max(1.0));
        }

        #[test]
        fn pearson_affine_invariant(
            v in prop::collection::vec(-100f64..100.0, 8..64),
            w in prop::collection::vec(-100f64..100.0, 8..64),
            a in 0.01f64..100.0,
            b in -1e3f64..1e3,
        ) {
            let n = v.len().min(w.len());
            let x = ts(v[..n].to_vec());
            let y = ts(w[..n].to_vec());
            prop_assume!(stats::variance(&x.values) > 1e-6 && stats::variance(&y.values) > 1e-6);
            let xs = x.with_values("xs", x.values.iter().map(|v| a * v + b).collect());
            let r0 = pearson_matrix(&[x, y.clone()]).unwrap().get(0, 1);
            let r1 = pearson_matrix(&[xs, y]).unwrap().get(0, 1);
            prop_assert!((r0 - r1).abs() < 1e-10);
        }

        // Sums of integers below 2^53 are exact, so the round trip is bit-exact.
        #[test]
        fn increments_invert_cumsum_on_integer_grid(v in prop::collection::vec(-1_000_000i64..1_000_000, 2..300)) {
            let xs: Vec<f64> = v.iter().map(|&i| i as f64).collect();
            let c = cumulative_sum(&xs);
            prop_assert_eq!(differences(&c), xs[1..].to_vec());
        }

        #[test]
        fn increments_invert_cumsum_on_reals(v in prop::collection::vec(-10f64..10.0, 2..300)) {
            let c = cumulative_sum(&v);
            let scale = c.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for (d, x) in differences(&c).iter().zip(&v[1..]) {
                prop_assert!((d - x).abs() <= 4.0 * f64::EPSILON * scale);
            }
        }
    }
}
