//! Replicated simulation experiments and their summary metrics.
//!
//! Each replication generates a fresh dataset on disk (or reuses one in
//! fixed-data mode), shuffles it when sampling sequentially, draws a batch of
//! `B` subsamples, and records the combined estimate and its SE^2. Random
//! streams are keyed by `(master seed, role, replication)`, so a report is a
//! pure function of the configuration whatever the thread count.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    self, combine, compensated_sum, PopulationMoments, StatisticKind, SubsampleStatistic,
};
use crate::harness::population::{write_numeric_store, PopulationKind};
use crate::line_store::{parse_fields_into, ByteAddressedFile, LineIndex, DEFAULT_BUFFER_SIZE};
use crate::rng::{self, Role};
use crate::sampler::{
    draw_batch_with, Addressing, Batch, Mode, SubsamplePlan, TimingBreakdown, WrapPolicy,
};
use crate::shuffler::{self, ShuffleConfig};

/// The five simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    /// Mean of N(0, 1).
    One,
    /// sin of the mean of N(1, 1).
    Two,
    /// Coefficient of variation of N(1, 1).
    Three,
    /// Correlation of a standard bivariate normal with covariance 0.5.
    Four,
    /// OLS coefficients, beta = (3, 1.5, 0, -0.5).
    Five,
}

pub const EXAMPLE5_BETA: [f64; 4] = [3.0, 1.5, 0.0, -0.5];

impl Example {
    pub fn from_number(k: u8) -> Result<Self> {
        Ok(match k {
            1 => Example::One,
            2 => Example::Two,
            3 => Example::Three,
            4 => Example::Four,
            5 => Example::Five,
            _ => return Err(Error::config(format!("example must be 1..=5, got {k}"))),
        })
    }

    pub fn number(self) -> u8 {
        match self {
            Example::One => 1,
            Example::Two => 2,
            Example::Three => 3,
            Example::Four => 4,
            Example::Five => 5,
        }
    }

    pub fn population(self) -> PopulationKind {
        match self {
            Example::One => PopulationKind::Normal {
                mu: 0.0,
                sigma2: 1.0,
            },
            Example::Two | Example::Three => PopulationKind::Normal {
                mu: 1.0,
                sigma2: 1.0,
            },
            Example::Four => PopulationKind::BivariateNormal {
                mu_x: 0.0,
                mu_y: 0.0,
                sigma_x: 1.0,
                sigma_y: 1.0,
                sigma_xy: 0.5,
            },
            Example::Five => PopulationKind::RegressionDesign {
                cov_decay: 0.5,
                beta: EXAMPLE5_BETA.to_vec(),
                noise_sigma2: 1.0,
            },
        }
    }

    pub fn statistic(self) -> StatisticKind {
        match self {
            Example::One => StatisticKind::Mean,
            Example::Two => StatisticKind::SinMean,
            Example::Three => StatisticKind::Cv,
            Example::Four => StatisticKind::Correlation,
            Example::Five => StatisticKind::OlsCoefficients,
        }
    }

    /// True parameter values used for the MSE.
    pub fn truth(self) -> Vec<f64> {
        match self {
            Example::One => vec![0.0],
            Example::Two => vec![1f64.sin()],
            Example::Three => vec![1.0],
            Example::Four => vec![0.5],
            Example::Five => EXAMPLE5_BETA.to_vec(),
        }
    }

    /// Population moments, for the settings with a closed-form Var*.
    pub fn moments(self) -> Option<PopulationMoments> {
        match self {
            Example::One => Some(PopulationMoments::normal(0.0, 1.0)),
            Example::Two => Some(PopulationMoments::normal(1.0, 1.0)),
            _ => None,
        }
    }

    pub fn component_names(self) -> Vec<String> {
        match self {
            Example::Five => (0..4).map(|j| format!("beta{j}")).collect(),
            _ => vec!["theta".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub example: Example,
    /// Records per dataset, N.
    pub big_n: u64,
    pub n: usize,
    pub b: usize,
    /// Replications, R.
    pub r: usize,
    pub mode: Mode,
    pub wrap: WrapPolicy,
    pub addressing: Addressing,
    pub seed: u64,
    /// Reuse one dataset for every replication (sampling variance only).
    pub fixed_data: bool,
    /// Shuffle the store before SAS draws.
    pub shuffle: bool,
    pub shuffle_caches: Option<usize>,
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    pub read_buffer: usize,
    /// Scratch directory; a temporary one is used when `None`.
    pub work_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(example: Example, big_n: u64, n: usize, b: usize, r: usize, seed: u64) -> Self {
        ExperimentConfig {
            example,
            big_n,
            n,
            b,
            r,
            mode: Mode::Sas,
            wrap: WrapPolicy::Wrap,
            addressing: Addressing::Byte,
            seed,
            fixed_data: false,
            shuffle: true,
            shuffle_caches: None,
            jobs: 0,
            read_buffer: DEFAULT_BUFFER_SIZE,
            work_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 2 {
            return Err(Error::config("B must be at least 2"));
        }
        if self.n == 0 || self.n as u64 > self.big_n {
            return Err(Error::config("need 1 <= n <= N"));
        }
        if self.r == 0 {
            return Err(Error::config("R must be at least 1"));
        }
        Ok(())
    }

    fn plan(&self) -> SubsamplePlan {
        SubsamplePlan {
            n: self.n,
            b: self.b,
            mode: self.mode,
            seed: self.seed,
            wrap: self.wrap,
            addressing: self.addressing,
        }
    }

    fn data_index(&self, r: usize) -> u64 {
        if self.fixed_data {
            0
        } else {
            r as u64
        }
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    /// Aggregate estimate (average of subsample statistics).
    pub estimate: Vec<f64>,
    /// Plug-in estimate `g(combined mean)`, for mean-based statistics.
    pub plugin: Option<Vec<f64>>,
    pub se2: Vec<f64>,
    pub used_subsamples: usize,
    /// Subsamples whose statistic was undefined and were left out.
    pub excluded: usize,
    pub addressing_ops: u64,
    pub timing: TimingBreakdown,
}

/// Parse every subsample of a batch and compute `kind` on it. Subsamples
/// with an undefined statistic (zero-mean CV, degenerate correlation,
/// rank-deficient OLS) are dropped and counted.
pub fn statistics_for_batch(
    batch: &Batch,
    kind: StatisticKind,
) -> Result<(Vec<SubsampleStatistic>, Vec<f64>, usize)> {
    let mut stats = Vec::with_capacity(batch.subsamples.len());
    let mut means = Vec::with_capacity(batch.subsamples.len());
    let mut excluded = 0;
    let mut fields = Vec::new();
    for s in &batch.subsamples {
        let mut rows = Vec::with_capacity(s.records.len());
        for rec in &s.records {
            parse_fields_into(&rec.raw, rec.origin_offset, &mut fields)?;
            rows.push(fields.clone());
        }
        match estimators::compute_statistic(kind, &rows) {
            Ok(st) => {
                if matches!(kind, StatisticKind::Mean | StatisticKind::SinMean) {
                    means.push(compensated_sum(rows.iter().map(|r| r[0])) / rows.len() as f64);
                }
                stats.push(st);
            }
            Err(Error::Undefined(_)) | Err(Error::RankDeficient) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((stats, means, excluded))
}

fn replication_paths(dir: &Path, data_index: u64) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("data_{data_index}.csv")),
        dir.join(format!("data_{data_index}.shuf")),
    )
}

/// Generate (and shuffle, for SAS) the store used by replication `r`.
/// Returns the path to sample from.
pub fn prepare_store(config: &ExperimentConfig, r: usize, dir: &Path) -> Result<PathBuf> {
    let di = config.data_index(r);
    let (raw, shuffled) = replication_paths(dir, di);
    write_numeric_store(
        &config.example.population(),
        config.big_n,
        rng::stream(config.seed, Role::Data, di),
        &raw,
    )?;
    if config.mode == Mode::Sas && config.shuffle {
        let mut sc = ShuffleConfig::new(dir.join(format!("caches_{di}")), rng::derive_seed(config.seed, Role::ShuffleSeed, di));
        sc.caches = config.shuffle_caches;
        shuffler::shuffle(&raw, &sc, &shuffled)?;
        let _ = fs::remove_dir_all(&sc.temp_dir);
        fs::remove_file(&raw)?;
        Ok(shuffled)
    } else {
        Ok(raw)
    }
}

fn sample_replication(
    config: &ExperimentConfig,
    r: usize,
    store: &Path,
    index: Option<&LineIndex>,
) -> Result<ReplicationResult> {
    let mut file = ByteAddressedFile::open_with_buffer(store, config.read_buffer)?;
    let plan = config.plan();
    let owned_index;
    let index = match (plan.needs_index(), index) {
        (true, None) => {
            owned_index = file.line_index()?;
            Some(&owned_index)
        }
        (_, ix) => ix,
    };
    let mut rng = rng::stream(config.seed, Role::Sample, r as u64);
    let batch = draw_batch_with(&mut file, &plan, index, &mut rng)?;
    let kind = config.example.statistic();
    let (stats, means, excluded) = statistics_for_batch(&batch, kind)?;
    if stats.len() < 2 {
        return Err(Error::Undefined("fewer than two usable subsamples"));
    }
    let combined = combine(&stats, config.n, config.big_n)?;
    let plugin = match kind {
        StatisticKind::Mean => Some(vec![estimators::combined_mean(&means)?]),
        StatisticKind::SinMean => Some(vec![estimators::plugin_estimate(
            estimators::combined_mean(&means)?,
            f64::sin,
        )?]),
        _ => None,
    };
    Ok(ReplicationResult {
        estimate: combined.point,
        plugin,
        se2: combined.se2,
        used_subsamples: stats.len(),
        excluded,
        addressing_ops: batch.addressing_ops,
        timing: batch.timing,
    })
}

/// Run replication `r` end to end inside `dir`, leaving its store in place.
pub fn run_replication(config: &ExperimentConfig, r: usize, dir: &Path) -> Result<(ReplicationResult, PathBuf)> {
    let store = prepare_store(config, r, dir)?;
    let result = sample_replication(config, r, &store, None)?;
    Ok((result, store))
}

/// Metrics of one estimated component (a scalar parameter or one
/// regression coefficient).
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMetrics {
    pub name: String,
    pub truth: f64,
    pub mse: f64,
    /// Across-replication sample variance; absent when R = 1.
    pub var: Option<f64>,
    pub var_star: Option<f64>,
    /// Mean of the per-replication SE^2.
    pub se2: f64,
    pub ratio_var_varstar: Option<f64>,
    pub ratio_se2_varstar_mean: Option<f64>,
    pub ratio_se2_varstar_sd: Option<f64>,
    pub ratio_se2_var: Option<f64>,
    /// MSE of the plug-in estimator, when one exists.
    pub plugin_mse: Option<f64>,
    pub plugin_var: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub components: Vec<ComponentMetrics>,
    pub replications: Vec<ReplicationResult>,
    pub mean_hdsc: f64,
    pub mean_addressing_cost: f64,
    pub mean_io_cost: f64,
    /// Addressing operations of every replication's batch.
    pub addressing_ops: Vec<u64>,
    pub excluded_subsamples: usize,
}

fn mean(v: &[f64]) -> f64 {
    compensated_sum(v.iter().copied()) / v.len() as f64
}

fn sample_var(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    Some(compensated_sum(v.iter().map(|x| (x - m) * (x - m))) / (v.len() - 1) as f64)
}

impl MetricsReport {
    pub fn from_replications(config: ExperimentConfig, replications: Vec<ReplicationResult>) -> Result<Self> {
        if replications.is_empty() {
            return Err(Error::config("no replications"));
        }
        let ex = config.example;
        let truth = ex.truth();
        let var_star = match ex.moments() {
            Some(m) => Some(estimators::theoretical_var_star(ex.statistic(), &m, config.n, config.b, config.big_n)?),
            None => None,
        };
        let names = ex.component_names();
        let mut components = Vec::with_capacity(truth.len());
        for (j, name) in names.into_iter().enumerate() {
            let est: Vec<f64> = replications.iter().map(|r| r.estimate[j]).collect();
            let se2s: Vec<f64> = replications.iter().map(|r| r.se2[j]).collect();
            let t = truth[j];
            let mse = mean(&est.iter().map(|e| (e - t) * (e - t)).collect::<Vec<_>>());
            let var = sample_var(&est);
            let se2 = mean(&se2s);
            let ratios: Option<Vec<f64>> = var_star.map(|vs| se2s.iter().map(|s| s / vs).collect());
            let plugin: Option<Vec<f64>> = replications
                .iter()
                .map(|r| r.plugin.as_ref().map(|p| p[j]))
                .collect();
            components.push(ComponentMetrics {
                name,
                truth: t,
                mse,
                var,
                var_star,
                se2,
                ratio_var_varstar: var.zip(var_star).map(|(v, s)| v / s),
                ratio_se2_varstar_mean: ratios.as_ref().map(|r| mean(r)),
                ratio_se2_varstar_sd: ratios.as_ref().and_then(|r| sample_var(r)).map(f64::sqrt),
                ratio_se2_var: var.map(|v| se2 / v),
                plugin_mse: plugin
                    .as_ref()
                    .map(|p| mean(&p.iter().map(|e| (e - t) * (e - t)).collect::<Vec<_>>())),
                plugin_var: plugin.as_ref().and_then(|p| sample_var(p)),
            });
        }
        let hdsc: Vec<f64> = replications.iter().map(|r| r.timing.hdsc()).collect();
        let addr: Vec<f64> = replications.iter().map(|r| r.timing.addressing_cost).collect();
        let io: Vec<f64> = replications.iter().map(|r| r.timing.io_cost).collect();
        Ok(MetricsReport {
            mean_hdsc: mean(&hdsc),
            mean_addressing_cost: mean(&addr),
            mean_io_cost: mean(&io),
            addressing_ops: replications.iter().map(|r| r.addressing_ops).collect(),
            excluded_subsamples: replications.iter().map(|r| r.excluded).sum(),
            components,
            replications,
            config,
        })
    }

    /// CSV header for reports of `example`.
    pub fn csv_header(example: Example) -> Vec<String> {
        let mut h: Vec<String> = [
            "example", "N", "n", "B", "R", "mode", "wrap", "seed", "fixed_data",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for name in example.component_names() {
            for col in [
                "truth",
                "mse",
                "var",
                "var_star",
                "se2",
                "var_over_var_star",
                "se2_over_var_star_mean",
                "se2_over_var_star_sd",
                "se2_over_var",
            ] {
                h.push(format!("{name}_{col}"));
            }
        }
        h.extend(
            [
                "mean_hdsc_s",
                "mean_addressing_s",
                "mean_io_s",
                "addressing_ops_per_batch",
                "excluded_subsamples",
                "status",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        h
    }

    fn config_columns(config: &ExperimentConfig) -> Vec<String> {
        vec![
            config.example.number().to_string(),
            config.big_n.to_string(),
            config.n.to_string(),
            config.b.to_string(),
            config.r.to_string(),
            config.mode.as_str().into(),
            match config.wrap {
                WrapPolicy::Wrap => "wrap".into(),
                WrapPolicy::NoWrap => "no-wrap".into(),
            },
            config.seed.to_string(),
            config.fixed_data.to_string(),
        ]
    }

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut row = Self::config_columns(&self.config);
        for c in &self.components {
            row.push(format!("{:e}", c.truth));
            row.push(format!("{:e}", c.mse));
            row.push(opt(c.var));
            row.push(opt(c.var_star));
            row.push(format!("{:e}", c.se2));
            row.push(opt(c.ratio_var_varstar));
            row.push(opt(c.ratio_se2_varstar_mean));
            row.push(opt(c.ratio_se2_varstar_sd));
            row.push(opt(c.ratio_se2_var));
        }
        let ops = if self.addressing_ops.iter().all(|&o| o == self.addressing_ops[0]) {
            self.addressing_ops[0].to_string()
        } else {
            "varies".into()
        };
        row.extend([
            format!("{:e}", self.mean_hdsc),
            format!("{:e}", self.mean_addressing_cost),
            format!("{:e}", self.mean_io_cost),
            ops,
            self.excluded_subsamples.to_string(),
            "ok".into(),
        ]);
        row
    }

    /// Row marking a configuration that failed; metric columns are empty.
    pub fn failed_csv_row(config: &ExperimentConfig, err: &Error) -> Vec<String> {
        let mut row = Self::config_columns(config);
        let width = Self::csv_header(config.example).len();
        row.resize(width - 1, String::new());
        row.push(format!("failed: {err}"));
        row
    }
}

/// Run all `R` replications and summarize them.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport> {
    config.validate()?;
    let tmp;
    let dir = match &config.work_dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            d.clone()
        }
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };

    let shared = if config.fixed_data {
        let store = prepare_store(config, 0, &dir)?;
        let index = if config.plan().needs_index() {
            Some(ByteAddressedFile::open(&store)?.line_index()?)
        } else {
            None
        };
        Some((store, index))
    } else {
        None
    };

    let run_one = |r: usize| -> Result<ReplicationResult> {
        match &shared {
            Some((store, index)) => sample_replication(config, r, store, index.as_ref()),
            None => {
                let store = prepare_store(config, r, &dir)?;
                let out = sample_replication(config, r, &store, None);
                let _ = fs::remove_file(&store);
                out
            }
        }
    };

    let replications: Vec<ReplicationResult> = if config.jobs == 1 {
        (0..config.r).map(run_one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::config(e.to_string()))?;
        pool.install(|| (0..config.r).into_par_iter().map(run_one).collect::<Result<_>>())?
    };
    if let Some((store, _)) = &shared {
        let _ = fs::remove_file(store);
    }
    MetricsReport::from_replications(config.clone(), replications)
}

/// One estimate computed from an existing store.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreEstimate {
    pub kind: StatisticKind,
    pub point: Vec<f64>,
    pub se2: Vec<f64>,
    pub plugin: Option<f64>,
    pub c: f64,
    pub records: u64,
    pub used_subsamples: usize,
    pub excluded: usize,
    pub addressing_ops: u64,
    pub timing: TimingBreakdown,
}

/// Draw one batch from `path` and compute the combined estimate of `kind`.
/// N is the exact line count from a sequential pass.
pub fn estimate_store(path: &Path, plan: &SubsamplePlan, kind: StatisticKind) -> Result<StoreEstimate> {
    let mut file = ByteAddressedFile::open(path)?;
    let index = file.line_index()?;
    let records = index.len() as u64;
    plan.validate(records)?;
    let mut rng = rng::stream(plan.seed, Role::Sample, 0);
    let batch = draw_batch_with(&mut file, plan, Some(&index), &mut rng)?;
    let (stats, means, excluded) = statistics_for_batch(&batch, kind)?;
    if stats.len() < 2 {
        return Err(Error::Undefined("fewer than two usable subsamples"));
    }
    let combined = combine(&stats, plan.n, records)?;
    let plugin = match kind {
        StatisticKind::Mean => Some(estimators::combined_mean(&means)?),
        StatisticKind::SinMean => Some(estimators::plugin_estimate(estimators::combined_mean(&means)?, f64::sin)?),
        _ => None,
    };
    Ok(StoreEstimate {
        kind,
        point: combined.point,
        se2: combined.se2,
        plugin,
        c: combined.c,
        records,
        used_subsamples: stats.len(),
        excluded,
        addressing_ops: batch.addressing_ops,
        timing: batch.timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_replication_has_no_variance() {
        let mut cfg = ExperimentConfig::new(Example::One, 500, 20, 5, 1, 3);
        cfg.jobs = 1;
        let report = run_experiment(&cfg).unwrap();
        let c = &report.components[0];
        assert!(c.var.is_none());
        assert!(c.ratio_var_varstar.is_none());
        let e = report.replications[0].estimate[0];
        assert!((c.mse - e * e).abs() < 1e-18);
        assert_eq!(report.addressing_ops, vec![5]);
    }

    #[test]
    fn report_is_independent_of_thread_count() {
        let mut cfg = ExperimentConfig::new(Example::Two, 400, 10, 4, 6, 11);
        cfg.jobs = 1;
        let serial = run_experiment(&cfg).unwrap();
        cfg.jobs = 3;
        let parallel = run_experiment(&cfg).unwrap();
        let est = |r: &MetricsReport| r.replications.iter().map(|x| (x.estimate.clone(), x.se2.clone())).collect::<Vec<_>>();
        assert_eq!(est(&serial), est(&parallel));
    }

    #[test]
    fn ratios_recompute_from_raw_columns() {
        let mut cfg = ExperimentConfig::new(Example::One, 1000, 20, 10, 8, 5);
        cfg.jobs = 1;
        let report = run_experiment(&cfg).unwrap();
        let c = &report.components[0];
        let est: Vec<f64> = report.replications.iter().map(|r| r.estimate[0]).collect();
        let m = est.iter().sum::<f64>() / 8.0;
        let var = est.iter().map(|e| (e - m).powi(2)).sum::<f64>() / 7.0;
        assert!((c.var.unwrap() - var).abs() <= 1e-12 * var);
        let vs = 1.0 / 200.0 + 1.0 / 1000.0;
        assert!((c.var_star.unwrap() - vs).abs() < 1e-15);
        assert!((c.ratio_var_varstar.unwrap() - c.var.unwrap() / vs).abs() < 1e-12);
        assert!((c.ratio_se2_var.unwrap() - c.se2 / c.var.unwrap()).abs() < 1e-12);
        assert!(report.mean_hdsc >= 0.0);
    }

    #[test]
    fn csv_layout_matches_header() {
        let mut cfg = ExperimentConfig::new(Example::Five, 300, 50, 3, 2, 1);
        cfg.jobs = 1;
        let report = run_experiment(&cfg).unwrap();
        let header = MetricsReport::csv_header(Example::Five);
        assert_eq!(report.csv_row().len(), header.len());
        assert!(header.contains(&"beta3_se2_over_var".to_string()));
        let failed = MetricsReport::failed_csv_row(&cfg, &Error::EmptyStore);
        assert_eq!(failed.len(), header.len());
        assert_eq!(failed.last().unwrap(), "failed: empty store");
    }

    #[test]
    fn invalid_configs() {
        assert!(run_experiment(&ExperimentConfig::new(Example::One, 100, 10, 1, 2, 0)).is_err());
        assert!(run_experiment(&ExperimentConfig::new(Example::One, 100, 101, 2, 2, 0)).is_err());
        assert!(run_experiment(&ExperimentConfig::new(Example::One, 100, 10, 2, 0, 0)).is_err());
        assert!(Example::from_number(6).is_err());
    }
}
