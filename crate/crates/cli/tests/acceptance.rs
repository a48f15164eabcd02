//! Acceptance criteria, run in sequence so each runtime is measured alone.
//! Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use tsscale_cli::{run_pipeline, PipelineConfig, PipelineReport};
use tsscale_core::dfa::{self, FluctuationFunction};
use tsscale_core::distfit::{self, DistfitConfig};
use tsscale_core::series::{self, cumulative_sum};
use tsscale_core::spectral::{self, LpsdConfig};
use tsscale_core::ssa::{self, SsaConfig};
use tsscale_core::surrogate::{self, SurrogateConfig};
use tsscale_core::synth::{generate, rng_from_seed, GeneratorSpec, SignalKind};
use tsscale_core::{stats, Distribution, Family, TimeSeries};

type Outcome = Result<String, String>;

fn check(cond: bool, what: String, fails: &mut Vec<String>) {
    if !cond {
        fails.push(what);
    }
}

fn verdict(details: Vec<String>, fails: Vec<String>) -> Outcome {
    if fails.is_empty() {
        Ok(details.join("; "))
    } else {
        Err(fails.join("; "))
    }
}

fn within(limit: Duration, elapsed: Duration, fails: &mut Vec<String>) {
    check(
        elapsed < limit,
        format!("took {:.1} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs()),
        fails,
    );
}

fn series(kind: SignalKind, n: usize, seed: u64) -> TimeSeries {
    generate(&GeneratorSpec::new(kind, n, seed)).unwrap()
}

fn dfa_full(values: &[f64]) -> f64 {
    let grid = dfa::default_box_grid(values.len(), 1.0, 10.0, 20).unwrap();
    let f: FluctuationFunction = dfa::dfa(values, 1, &grid, 1.0).unwrap();
    dfa::scaling_exponent(&f, 10.0, values.len() as f64).unwrap().alpha
}

fn c1_dfa_calibration() -> Outcome {
    let t = Instant::now();
    let white = series(SignalKind::White, 1 << 16, 1);
    let a_white = dfa_full(&white.values);
    let a_walk = dfa_full(&cumulative_sum(&white.values));
    let mut fails = Vec::new();
    check((a_white - 0.5).abs() <= 0.03, format!("white alpha {a_white:.4}"), &mut fails);
    check((a_walk - 1.5).abs() <= 0.05, format!("integrated alpha {a_walk:.4}"), &mut fails);
    within(Duration::from_secs(10), t.elapsed(), &mut fails);
    verdict(vec![format!("white {a_white:.4}, integrated {a_walk:.4}")], fails)
}

fn c2_spectral_calibration() -> Outcome {
    let t = Instant::now();
    let s = series(SignalKind::Powerlaw { beta: 1.5 }, 1 << 18, 2);
    let psd = spectral::lpsd(&s, &LpsdConfig::default()).unwrap();
    let fit = spectral::fit_spectral_exponent(&psd, 1e-4, 1e-2).unwrap();
    let mut fails = Vec::new();
    check((fit.beta - 1.5).abs() <= 0.1, format!("beta {:.4}", fit.beta), &mut fails);
    within(Duration::from_secs(30), t.elapsed(), &mut fails);
    verdict(vec![format!("beta {:.4} over [1e-4, 1e-2] per minute", fit.beta)], fails)
}

fn c3_cross_method() -> Outcome {
    let t = Instant::now();
    let mut details = Vec::new();
    let mut fails = Vec::new();
    for (i, beta) in [0.5, 1.0, 1.5, 2.0].into_iter().enumerate() {
        let s = series(SignalKind::Powerlaw { beta }, 1 << 16, 30 + i as u64);
        let alpha = dfa_full(&s.values);
        let want = (beta + 1.0) / 2.0;
        details.push(format!("beta {beta}: alpha {alpha:.4} vs {want}"));
        check((alpha - want).abs() <= 0.1, format!("beta {beta}: alpha {alpha:.4}"), &mut fails);
    }
    within(Duration::from_secs(120), t.elapsed(), &mut fails);
    verdict(details, fails)
}

/// Lagged correlations, eigen equation, principal components and diagonal
/// averaging written out term by term.
fn ssa_brute_force(n: usize, m: usize, seed: u64) -> f64 {
    let raw = series(SignalKind::Powerlaw { beta: 1.0 }, n, seed);
    let dec = ssa::decompose(&raw, &SsaConfig::with_window(m)).unwrap();
    let mean = raw.values.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = raw.values.iter().map(|v| v - mean).collect();
    let c: Vec<f64> = (0..m)
        .map(|k| (0..n - k).map(|i| x[i] * x[i + k]).sum::<f64>() / (n - k) as f64)
        .collect();
    let np = n - m + 1;
    let mut worst: f64 = 0.0;
    for k in 0..m {
        let e = &dec.eigenvectors[k];
        let lambda = dec.eigenvalues[k];
        if lambda > 0.0 {
            for i in 0..m {
                let ce: f64 = (0..m).map(|j| c[i.abs_diff(j)] * e[j]).sum();
                worst = worst.max((ce - lambda * e[i]).abs());
            }
        }
        let a: Vec<f64> = (0..np).map(|i| (0..m).map(|j| x[i + j] * e[j]).sum()).collect();
        for i in 0..np {
            worst = worst.max((a[i] - dec.pcs[k][i]).abs());
        }
        for i in 0..n {
            let (lo, hi, norm) = if i + 1 < m {
                (0, i, (i + 1) as f64)
            } else if i < np {
                (0, m - 1, m as f64)
            } else {
                (i + m - n, m - 1, (n - i) as f64)
            };
            let sum: f64 = (lo..=hi).map(|j| a[i - j] * e[j]).sum();
            let level = if k == 0 { mean } else { 0.0 };
            worst = worst.max((sum / norm + level - dec.rcs[k][i]).abs());
        }
    }
    worst
}

fn c4_ssa() -> Outcome {
    let t = Instant::now();
    let mut fails = Vec::new();
    let mut brute: f64 = 0.0;
    for (n, m, seed) in [(60, 4, 1), (150, 7, 2), (200, 10, 3), (200, 40, 4)] {
        brute = brute.max(ssa_brute_force(n, m, seed));
    }
    check(brute <= 1e-9, format!("brute-force deviation {brute:.2e}"), &mut fails);

    let s = series(SignalKind::Powerlaw { beta: 1.5 }, 10_000, 5);
    let dec = ssa::decompose(&s, &SsaConfig::for_length(s.len(), 2.5).unwrap()).unwrap();
    let complete = (0..s.len())
        .map(|i| (dec.rcs.iter().map(|rc| rc[i]).sum::<f64>() - s.values[i]).abs())
        .fold(0.0, f64::max);
    check(complete <= 1e-8, format!("completeness {complete:.2e}"), &mut fails);

    let noise = series(SignalKind::White, 2000, 6);
    let ramp: Vec<f64> = (0..2000).map(|i| 0.01 * i as f64).collect();
    let noisy = noise.with_values("ramp", ramp.iter().zip(&noise.values).map(|(r, w)| r + 0.5 * w).collect());
    let mut cfg = SsaConfig::for_length(noisy.len(), 2.5).unwrap();
    cfg.components = Some(1);
    let dec = ssa::decompose(&noisy, &cfg).unwrap();
    let r = stats::pearson(&dec.rcs[0], &ramp);
    check(r > 0.999, format!("ramp r {r:.6}"), &mut fails);

    within(Duration::from_secs(60), t.elapsed(), &mut fails);
    verdict(
        vec![format!(
            "brute force {brute:.2e}, completeness at 1e4 {complete:.2e}, ramp r {r:.6}"
        )],
        fails,
    )
}

fn generators() -> [Distribution; 3] {
    [
        Distribution::Weibull { shape: 2.0, scale: 3.0 },
        Distribution::Gamma { shape: 2.0, rate: 1.0 },
        Distribution::Gev {
            location: 3.0,
            scale: 1.0,
            shape: 0.1,
        },
    ]
}

fn c5_ranking() -> Outcome {
    let t = Instant::now();
    let cfg = DistfitConfig::default();
    let mut details = Vec::new();
    let mut fails = Vec::new();
    for (f, dist) in generators().into_iter().enumerate() {
        let mut hits = 0;
        for trial in 0..100u64 {
            let mut rng = rng_from_seed(1000 * f as u64 + trial);
            let ts = TimeSeries::new("x", 1.0, dist.sample(&mut rng, 100_000)).unwrap();
            let ranking = distfit::rank_distributions(&ts, &cfg).unwrap();
            if ranking.best().distribution.family() == dist.family() {
                hits += 1;
            }
        }
        details.push(format!("{} {hits}/100", dist.family()));
        check(hits >= 95, format!("{} ranked first in {hits}/100", dist.family()), &mut fails);
    }
    within(Duration::from_secs(300), t.elapsed(), &mut fails);
    verdict(details, fails)
}

fn c6_kl() -> Outcome {
    let mut details = Vec::new();
    let mut fails = Vec::new();
    for (f, dist) in generators().into_iter().enumerate() {
        let mut rng = rng_from_seed(77 + f as u64);
        let ts = TimeSeries::new("x", 1.0, dist.sample(&mut rng, 100_000)).unwrap();
        let kl = distfit::kl_divergence(&ts, &dist, None).unwrap().value;
        details.push(format!("self KL {} {kl:.2e}", dist.family()));
        check(kl < 0.01, format!("self KL {} {kl}", dist.family()), &mut fails);
    }

    let mut runner = TestRunner::new(PropConfig {
        cases: 256,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (0usize..3, 0usize..3, 0.5f64..4.0, 0.2f64..5.0, -0.3f64..0.3, 50usize..5000, any::<u64>());
    let lowest = std::cell::Cell::new(f64::INFINITY);
    let result = runner.run(&strategy, |(from, to, shape, scale, xi, n, seed)| {
        let make = |family: usize| match Family::ALL[family] {
            Family::Weibull => Distribution::Weibull { shape, scale },
            Family::Gamma => Distribution::Gamma { shape, rate: 1.0 / scale },
            Family::Gev => Distribution::Gev {
                location: 3.0 * scale,
                scale,
                shape: xi,
            },
        };
        let mut rng = rng_from_seed(seed);
        let ts = TimeSeries::new("x", 1.0, make(from).sample(&mut rng, n)).unwrap();
        let kl = distfit::kl_divergence(&ts, &make(to), None).unwrap();
        if kl.value.is_finite() {
            lowest.set(lowest.get().min(kl.raw));
        }
        prop_assert!(kl.value >= -1e-10);
        prop_assert!(kl.raw >= -1e-10, "raw sum {}", kl.raw);
        Ok(())
    });
    details.push(format!("lowest raw KL over 256 cases {:.3e}", lowest.get()));
    if let Err(e) = result {
        fails.push(format!("non-negativity: {e}"));
    }
    verdict(details, fails)
}

fn c7_surrogate_contrast() -> Outcome {
    let t = Instant::now();
    let n = 1 << 14;
    let s = series(SignalKind::Cascade { depth: 14, sigma: 0.15 }, n, 7);
    let inc = series::increments(&s).unwrap();
    let top = (n / 10) as f64;
    let grid = dfa::default_box_grid(inc.len(), 1.0, 10.0, 20).unwrap();
    let cfg = SurrogateConfig {
        count: 100,
        seed: 7,
        ..SurrogateConfig::default()
    };
    let r = surrogate::ensemble_test(&inc, &cfg, [10.0, top], 1, &grid).unwrap();
    let mag_gap = r.alpha_mag_orig - r.alpha_mag_mean;
    let sign_gap = (r.alpha_sign_orig - r.alpha_sign_mean).abs();
    let mut fails = Vec::new();
    check(
        mag_gap > 3.0 * r.alpha_mag_std,
        format!("magnitude gap {mag_gap:.4} vs 3 std {:.4}", 3.0 * r.alpha_mag_std),
        &mut fails,
    );
    check(
        sign_gap < 2.0 * r.alpha_sign_std,
        format!("sign gap {sign_gap:.4} vs 2 std {:.4}", 2.0 * r.alpha_sign_std),
        &mut fails,
    );
    within(Duration::from_secs(600), t.elapsed(), &mut fails);
    verdict(
        vec![format!(
            "alpha_mag {:.4} vs {:.4} +- {:.4}; alpha_sign {:.4} vs {:.4} +- {:.4}",
            r.alpha_mag_orig, r.alpha_mag_mean, r.alpha_mag_std, r.alpha_sign_orig, r.alpha_sign_mean, r.alpha_sign_std
        )],
        fails,
    )
}

const N9: usize = 16_384;

fn iso_minute(m: usize) -> String {
    format!("2024-03-{:02}T{:02}:{:02}:00Z", 1 + m / 1440, (m / 60) % 24, m % 60)
}

/// Six powerlaw series, each standardized and added to one slow oscillation,
/// written as CSVs with ISO timestamps under `dir`.
fn write_pattern_inputs(dir: &Path) -> PipelineConfig {
    let mut inputs = String::new();
    for k in 0..6u64 {
        let noise = series(SignalKind::Powerlaw { beta: 0.5 }, N9, 900 + k);
        let (m, sd) = (stats::mean(&noise.values), stats::std_dev(&noise.values));
        let mut text = String::from("time,speed\n");
        for (i, v) in noise.values.iter().enumerate() {
            let trend = 6.0 * (2.0 * std::f64::consts::PI * i as f64 / N9 as f64).sin();
            text.push_str(&format!("{},{:.17e}\n", iso_minute(i), 10.0 + trend + (v - m) / sd));
        }
        let name = format!("mast{k}.csv");
        std::fs::write(dir.join(&name), text).unwrap();
        inputs.push_str(&format!(
            "[[inputs]]\npath = \"{name}\"\nvalue_column = \"speed\"\nlabel = \"mast{k}\"\n\n"
        ));
    }
    let toml = format!(
        "seed = 11\noutput_dir = \"out\"\n\n{inputs}[ingest]\ntime_column = \"time\"\n\n[surrogate]\ncount = 10\n"
    );
    let path = dir.join("pipeline.toml");
    std::fs::write(&path, toml).unwrap();
    PipelineConfig::load(&path).unwrap()
}

fn c8_exact_invariants(cfg: &PipelineConfig, first: &PipelineReport) -> Outcome {
    let mut fails = Vec::new();

    let inc = series::increments(&series(SignalKind::Cascade { depth: 12, sigma: 0.15 }, 4096, 3)).unwrap();
    let s = surrogate::make_surrogate(&inc.values, 5, &SurrogateConfig::default()).unwrap();
    let (mut a, mut b) = (inc.values.clone(), s.values.clone());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    check(
        a.iter().map(|v| v.to_bits()).eq(b.iter().map(|v| v.to_bits())),
        "surrogate is not a permutation of its input".into(),
        &mut fails,
    );

    let pair = series::mag_sign(&inc);
    check(pair.reconstruct() == inc.values, "magnitude x sign differs from increments".into(), &mut fails);

    let mut worst: f64 = 0.0;
    for sr in &first.series {
        let dir = cfg.output_dir.join(&sr.label);
        let read = |name: &str| -> Vec<f64> {
            std::fs::read_to_string(dir.join(name))
                .unwrap()
                .lines()
                .skip(1)
                .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
                .collect()
        };
        let (x, trend, residual) = (read("series.csv"), read("trend.csv"), read("residual.csv"));
        for i in 0..x.len() {
            worst = worst.max((trend[i] + residual[i] - x[i]).abs() / x[i].abs().max(1.0));
        }
    }
    check(worst <= 4.0 * f64::EPSILON, format!("trend + residual off by {worst:.2e}"), &mut fails);

    for p in [&first.pearson_originals, &first.pearson_trends] {
        let m = p.matrix.as_ref().expect("pearson matrix");
        for i in 0..m.labels.len() {
            check(m.get(i, i) == 1.0, format!("diagonal {i} is {}", m.get(i, i)), &mut fails);
            for j in 0..m.labels.len() {
                check(m.get(i, j) == m.get(j, i), format!("asymmetric at ({i}, {j})"), &mut fails);
            }
        }
    }

    let report = cfg.output_dir.join("report.json");
    let before = std::fs::read(&report).unwrap();
    run_pipeline(cfg, cfg.seed).unwrap();
    check(before == std::fs::read(&report).unwrap(), "report bytes changed on rerun".into(), &mut fails);

    verdict(
        vec![format!("permutation, reconstruction, identity (max rel {worst:.1e}), pearson shape, byte-identical report")],
        fails,
    )
}

fn c9_pattern(report: &PipelineReport) -> Outcome {
    let mut fails = Vec::new();
    let originals = report.pearson_originals.matrix.as_ref().unwrap();
    let trends = report.pearson_trends.matrix.as_ref().unwrap();
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = f64::NEG_INFINITY;
    for i in 0..6 {
        for j in 0..6 {
            if i != j {
                lo.0 = lo.0.min(originals.get(i, j));
                hi = hi.max(originals.get(i, j));
                lo.1 = lo.1.min(trends.get(i, j));
            }
        }
    }
    check(lo.1 > 0.99, format!("lowest trend correlation {:.5}", lo.1), &mut fails);
    check(
        lo.0 >= 0.8 && hi <= 1.0,
        format!("original correlations span [{:.4}, {hi:.4}]", lo.0),
        &mut fails,
    );
    verdict(
        vec![format!("trends >= {:.5}; originals in [{:.4}, {hi:.4}]", lo.1, lo.0)],
        fails,
    )
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let secs = t.elapsed().as_secs_f64();
    let (ok, line) = match &outcome {
        Ok(d) => (true, format!("PASS criterion {id} ({name}) [{secs:.1} s]: {d}")),
        Err(d) => (false, format!("FAIL criterion {id} ({name}) [{secs:.1} s]: {d}")),
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
    ok
}

fn main() {
    let mut ok = true;
    ok &= run(1, "DFA calibration", c1_dfa_calibration);
    ok &= run(2, "spectral calibration", c2_spectral_calibration);
    ok &= run(3, "cross-method consistency", c3_cross_method);
    ok &= run(4, "SSA correctness", c4_ssa);
    ok &= run(5, "distribution ranking", c5_ranking);
    ok &= run(6, "KL properties", c6_kl);
    ok &= run(7, "surrogate contrast", c7_surrogate_contrast);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_pattern_inputs(tmp.path());
    let report = run_pipeline(&cfg, cfg.seed);
    match &report {
        Ok(r) => {
            ok &= run(8, "exact invariants", || c8_exact_invariants(&cfg, r));
            ok &= run(9, "pipeline pattern", || c9_pattern(r));
        }
        Err(e) => {
            for (id, name) in [(8, "exact invariants"), (9, "pipeline pattern")] {
                ok &= run(id, name, || Err(format!("pipeline failed: {e}")));
            }
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
