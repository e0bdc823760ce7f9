//! Acceptance checks, one line per criterion. Run with
//! `cargo test --test acceptance` (add criterion numbers to run a subset).
//! Exits non-zero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use seqsample::estimators::{all_windows_variance, ols_fit, StatisticKind};
use seqsample::harness::{
    bench_hdsc, chunked_ols, estimate_store, generate_dataset, generate_flights_raw,
    preprocess_flights, run_experiment, BenchConfig, Example, ExperimentConfig, FlightsParams,
    MetricsReport, PopulationSpec,
};
use seqsample::rng::{derive_seed, stream, Role};
use seqsample::sampler::{Mode, SubsamplePlan};
use seqsample::shuffler::{shuffle, ShuffleConfig};
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn experiment(example: Example, big_n: u64, n: usize, b: usize, r: usize, mode: Mode, seed: u64) -> MetricsReport {
    let mut cfg = ExperimentConfig::new(example, big_n, n, b, r, seed);
    cfg.mode = mode;
    run_experiment(&cfg).unwrap_or_else(|e| panic!("experiment {example:?} ({big_n},{n},{b}) failed: {e}"))
}

fn ops_ok(report: &MetricsReport) -> bool {
    let c = &report.config;
    let want = match c.mode {
        Mode::Sas => c.b as u64,
        Mode::Ras => (c.n * c.b) as u64,
    };
    report.addressing_ops.iter().all(|&o| o == want)
}

fn c1_window_variance() -> Outcome {
    let t = Instant::now();
    let mut worst = 0f64;
    for big_n in 1..=50u64 {
        for n in 1..=big_n {
            let k = big_n - n + 1;
            let mut counts = vec![0u64; big_n as usize];
            for s in 0..k {
                for c in &mut counts[s as usize..(s + n) as usize] {
                    *c += 1;
                }
            }
            let denom = (n * k) as f64;
            let oracle: f64 = counts.iter().map(|&c| (c as f64 / denom).powi(2)).sum();
            let got = all_windows_variance(big_n, n, 1.0).unwrap();
            worst = worst.max((got - oracle).abs() / oracle);
        }
    }
    let spot = all_windows_variance(10, 3, 1.0).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-12 && (spot - 64.0 / 576.0).abs() <= 1e-12 * spot && secs < 1.0;
    outcome(pass, format!("max rel err {worst:.2e} (<= 1e-12), N=10 n=3 -> {spot:.12} (64/576), {secs:.3}s (< 1s)"))
}

fn c2_c3_mean(reports: &mut Vec<MetricsReport>) -> (Outcome, Outcome) {
    let r = experiment(Example::One, 100_000, 100, 100, 200, Mode::Sas, 2);
    let c = &r.components[0];
    let v = c.ratio_var_varstar.unwrap();
    let s = c.ratio_se2_varstar_mean.unwrap();
    let out = (
        outcome(within(v, 0.75, 1.25), format!("Var/Var* = {v:.3} in [0.75, 1.25]")),
        outcome(within(s, 0.85, 1.10), format!("mean SE^2/Var* = {s:.3} in [0.85, 1.10] (SD {:.3})", c.ratio_se2_varstar_sd.unwrap())),
    );
    reports.push(r);
    out
}

fn c4_se_stability(reports: &mut Vec<MetricsReport>) -> Outcome {
    let sd = |n, b, reports: &mut Vec<MetricsReport>| {
        let r = experiment(Example::One, 10_000, n, b, 200, Mode::Sas, 4);
        let v = r.components[0].ratio_se2_varstar_sd.unwrap();
        reports.push(r);
        v
    };
    let (a10, a1000) = (sd(100, 10, reports), sd(100, 1000, reports));
    let (b100, b1000) = (sd(1000, 100, reports), sd(1000, 1000, reports));
    let shrink = a10 / a1000;
    let drop = 1.0 - b1000 / b100;
    outcome(
        shrink >= 2.0 && drop < 0.30,
        format!(
            "n=100: SD {a10:.3} (B=10) -> {a1000:.3} (B=1000), factor {shrink:.2} (>= 2); \
             n=1000: SD {b100:.3} (B=100) -> {b1000:.3} (B=1000), decrease {:.1}% (< 30%)",
            100.0 * drop
        ),
    )
}

fn c5_sine(reports: &mut Vec<MetricsReport>) -> Outcome {
    let r = experiment(Example::Two, 100_000, 100, 100, 200, Mode::Sas, 5);
    let c = &r.components[0];
    let s = c.ratio_se2_varstar_mean.unwrap();
    let pass = within(c.mse, 2e-5, 8e-5) && within(s, 0.85, 1.10);
    let d = format!("MSE = {:.2}e-5 in [2, 8]e-5, mean SE^2/Var* = {s:.3} in [0.85, 1.10]", c.mse * 1e5);
    reports.push(r);
    outcome(pass, d)
}

fn c6_cv_corr(reports: &mut Vec<MetricsReport>) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (ex, name, seed) in [(Example::Three, "CV", 6), (Example::Four, "corr", 66)] {
        let r = experiment(ex, 100_000, 1000, 100, 200, Mode::Sas, seed);
        let s = r.components[0].ratio_se2_var.unwrap();
        pass &= within(s, 0.8, 1.2);
        parts.push(format!("{name}: SE^2/Var = {s:.3}"));
        reports.push(r);
    }
    outcome(pass, format!("{} (each in [0.8, 1.2])", parts.join(", ")))
}

fn c7_regression(reports: &mut Vec<MetricsReport>) -> Outcome {
    let r = experiment(Example::Five, 10_000, 1000, 100, 200, Mode::Sas, 7);
    let mut pass = true;
    let mut ratios = Vec::new();
    for c in &r.components {
        let s = c.ratio_se2_var.unwrap();
        pass &= within(s, 0.7, 1.3);
        ratios.push(format!("{s:.3}"));
    }
    let first = &r.replications[0];
    let mut z = Vec::new();
    for (j, truth) in Example::Five.truth().iter().enumerate() {
        let zj = (first.estimate[j] - truth).abs() / first.se2[j].sqrt();
        pass &= zj <= 4.0;
        z.push(format!("{zj:.2}"));
    }
    reports.push(r);
    outcome(
        pass,
        format!("SE^2/Var per coefficient [{}] in [0.7, 1.3]; |est - beta|/SE [{}] <= 4", ratios.join(", "), z.join(", ")),
    )
}

fn c8_addressing(reports: &mut Vec<MetricsReport>) -> Outcome {
    for &(n, b) in &[(100, 10), (1000, 10), (100, 100), (10, 1000)] {
        for mode in [Mode::Sas, Mode::Ras] {
            reports.push(experiment(Example::One, 10_000, n, b, 3, mode, 8));
        }
    }
    let bad: Vec<String> = reports
        .iter()
        .filter(|r| !ops_ok(r))
        .map(|r| format!("({},{},{:?})", r.config.n, r.config.b, r.config.mode))
        .collect();
    let batches: usize = reports.iter().map(|r| r.addressing_ops.len()).sum();
    outcome(bad.is_empty(), format!("{batches} batches over {} configurations; violations: {bad:?}", reports.len()))
}

fn c9_hdsc(dir: &Path) -> Outcome {
    let p = dir.join("hdsc.csv");
    generate_dataset(&PopulationSpec { kind: Example::One.population(), seed: 9 }, 10_000_000, &p).unwrap();
    let rows = bench_hdsc(&p, &BenchConfig::new(vec![(10_000, 50)], vec![Mode::Sas, Mode::Ras], 5, 9)).unwrap();
    let _ = std::fs::remove_file(&p);
    let (sas, ras) = (rows[0].mean_hdsc, rows[1].mean_hdsc);
    let ratio = ras / sas;
    outcome(
        sas < ras && ratio >= 3.0 && rows[0].addressing_ops == 50 && rows[1].addressing_ops == 500_000,
        format!("10^7 lines, (n,B)=(10^4,50), 5 reps, warm cache: SAS {sas:.4}s, RAS {ras:.4}s, RAS:SAS {ratio:.1} (>= 3)"),
    )
}

fn c10_shuffle(dir: &Path) -> Outcome {
    let big: String = (0..100_000u64).map(|i| format!("{i}:{}\n", "z".repeat((i % 13) as usize))).collect();
    let input = dir.join("multiset");
    std::fs::write(&input, &big).unwrap();
    let out = dir.join("multiset.shuf");
    let mut cfg = ShuffleConfig::new(dir.join("tmp"), 10).with_caches(16);
    cfg.memory_budget = 64 * 1024;
    let (_, stats) = shuffle(&input, &cfg, &out).unwrap();
    let mut a: Vec<&str> = big.lines().collect();
    let shuffled = std::fs::read_to_string(&out).unwrap();
    let mut b: Vec<&str> = shuffled.lines().collect();
    let moved = a != b;
    a.sort_unstable();
    b.sort_unstable();
    let multiset = a == b && moved;
    let memory = stats.peak_index_bytes() <= cfg.memory_budget;

    let small: String = (0..100).map(|i| format!("{i}\n")).collect();
    let input = dir.join("marked");
    std::fs::write(&input, small).unwrap();
    let out = dir.join("marked.shuf");
    let mut positions = vec![0u64; 100];
    let trials = 5000;
    for s in 0..trials {
        let cfg = ShuffleConfig::new(dir.join("tmp"), derive_seed(10, Role::ShuffleSeed, s)).with_caches(4);
        shuffle(&input, &cfg, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        positions[text.lines().position(|l| l == "0").unwrap()] += 1;
    }
    let e = trials as f64 / 100.0;
    let stat: f64 = positions.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
    let pv = 1.0 - ChiSquared::new(99.0).unwrap().cdf(stat);
    outcome(
        multiset && memory && pv > 0.01,
        format!(
            "10^5-line multiset equal: {multiset}; peak index {} B <= budget {} B: {memory}; marked-line chi2 = {stat:.1}, p = {pv:.3} (> 0.01)",
            stats.peak_index_bytes(),
            cfg.memory_budget
        ),
    )
}

fn c11_chunked_ols(dir: &Path) -> Outcome {
    let p = dir.join("ols.csv");
    generate_dataset(&PopulationSpec { kind: Example::Five.population(), seed: 11 }, 100_000, &p).unwrap();
    let fits: Vec<Vec<f64>> = [100, 1000, 10_000].iter().map(|&bs| chunked_ols(&p, bs).unwrap().coefficients).collect();
    let rows: Vec<Vec<f64>> = std::fs::read_to_string(&p)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    let mem = ols_fit(&rows).unwrap();
    let mut worst = 0f64;
    for a in fits.iter().chain(std::iter::once(&mem)) {
        for b in &fits {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max pairwise |diff| over block sizes 1e2/1e3/1e4 and in-memory fit = {worst:.2e} (<= 1e-10)"))
}

fn c12_flights(dir: &Path) -> Outcome {
    let raw = dir.join("flights_raw.csv");
    let store = dir.join("flights.csv");
    let shuffled = dir.join("flights.shuf");
    generate_flights_raw(&FlightsParams::default(), 1_900_000, stream(12, Role::Data, 0), &raw).unwrap();
    let (_, summary) = preprocess_flights(&raw, &store).unwrap();
    let _ = std::fs::remove_file(&raw);
    shuffle(&store, &ShuffleConfig::new(dir.join("tmp"), 12), &shuffled).unwrap();
    let ols = chunked_ols(&store, 1_000_000).unwrap();
    let est = estimate_store(&shuffled, &SubsamplePlan::new(10_000, 100, Mode::Sas, 12), StatisticKind::OlsCoefficients).unwrap();
    let z: Vec<f64> = est
        .point
        .iter()
        .zip(&est.se2)
        .zip(&ols.coefficients)
        .map(|((p, s), b)| (p - b).abs() / s.sqrt())
        .collect();
    let max_z = z.iter().cloned().fold(0.0, f64::max);
    outcome(
        summary.kept >= 1_000_000 && max_z <= 4.0 && z.len() == 10,
        format!(
            "N = {} preprocessed rows, 10 coefficients, max |SAS - OLS|/SE = {max_z:.2} (<= 4)",
            summary.kept
        ),
    )
}

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |k: u32| selected.is_empty() || selected.contains(&k);
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let record = |k: u32, name: &'static str, o: Outcome, results: &mut Vec<(u32, &str, Outcome)>| {
        println!("{} [{k:02}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, name, o));
    };

    if want(1) {
        record(1, "window-mean variance closed form", c1_window_variance(), &mut results);
    }
    if want(2) || want(3) {
        let (a, b) = c2_c3_mean(&mut reports);
        record(2, "mean: variance ratio, (N,n,B)=(1e5,100,100), R=200", a, &mut results);
        record(3, "mean: automatic-inference SE^2, same run", b, &mut results);
    }
    if want(4) {
        record(4, "SE^2 stability in B at N=1e4", c4_se_stability(&mut reports), &mut results);
    }
    if want(5) {
        record(5, "sin(mean): MSE and SE^2/Var*, (1e5,100,100)", c5_sine(&mut reports), &mut results);
    }
    if want(6) {
        record(6, "CV and correlation: SE^2/Var, (1e5,1000,100)", c6_cv_corr(&mut reports), &mut results);
    }
    if want(7) {
        record(7, "regression coefficients, (1e4,1000,100)", c7_regression(&mut reports), &mut results);
    }
    if want(8) {
        record(8, "addressing-count law over every simulated batch", c8_addressing(&mut reports), &mut results);
    }
    if want(9) {
        record(9, "HDSC: SAS faster than RAS", c9_hdsc(dir.path()), &mut results);
    }
    if want(10) {
        record(10, "external shuffle correctness", c10_shuffle(dir.path()), &mut results);
    }
    if want(11) {
        record(11, "chunked OLS agreement", c11_chunked_ols(dir.path()), &mut results);
    }
    if want(12) {
        record(12, "flights rehearsal: SAS vs chunked OLS", c12_flights(dir.path()), &mut results);
    }

    let failed: Vec<u32> = results.iter().filter(|(_, _, o)| !o.pass).map(|(k, _, _)| *k).collect();
    println!("acceptance: {} passed, {} failed {failed:?}", results.len() - failed.len(), failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
