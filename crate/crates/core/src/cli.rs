//! Command-line front end. Every randomized subcommand prints its resolved
//! configuration (including the master seed) to stderr so that a run can be
//! repeated exactly.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimators::StatisticKind;
use crate::harness::{
    self, BenchConfig, CacheMode, Example, ExperimentConfig, MetricsReport, PopulationKind,
    PopulationSpec,
};
use crate::line_store::ByteAddressedFile;
use crate::sampler::{draw_batch_with, Addressing, Mode, SubsamplePlan, WrapPolicy};
use crate::shuffler::{self, ShuffleConfig};

const SEED_ENV: &str = "SEQSAMPLE_SEED";

#[derive(Debug, Parser)]
#[command(name = "seqsample", version, about = "Subsample line-oriented files on disk with RAS or SAS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic store plus a `<out>.meta` sidecar.
    ///
    /// Numeric stores have one record per line, comma-separated fields in
    /// `%+010.6f` format, `\n` terminated, no header. Regression rows are
    /// response first. `flights` writes a raw CSV with a header row.
    Gen(GenArgs),
    /// Shuffle a store with bounded memory.
    Shuffle(ShuffleArgs),
    /// Draw one batch and write it as CSV `subsample,offset,line`.
    Sample(SampleArgs),
    /// Draw one batch and print the combined estimate with its SE.
    Estimate(EstimateArgs),
    /// Time RAS and SAS batches (HDSC) over an existing store.
    Bench(BenchArgs),
    /// Run replicated simulations over an (n, B) grid.
    Simulate(SimulateArgs),
    /// Turn a raw airline-style CSV into a regression store.
    Preprocess(PreprocessArgs),
    /// Least squares over a response-first store in blocks.
    Ols(OlsArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Master seed. Falls back to $SEQSAMPLE_SEED, then 1.
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// normal:MU,SIGMA2 | bivariate:MUX,MUY,SX,SY,SXY |
    /// regression:B0,B1,..[;decay=D][;noise=S2] | flights | example1..example5
    #[arg(long)]
    pub spec: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_rows: u64,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShuffleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Number of index caches b. Default: smallest b whose expected cache
    /// fits the memory budget.
    #[arg(long)]
    pub caches: Option<usize>,
    /// Bytes allowed for one resident cache (8 bytes per line).
    #[arg(long, default_value_t = shuffler::DEFAULT_MEMORY_BUDGET)]
    pub memory_budget: u64,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Directory for cache files `cache_{i}.idx` (8-byte little-endian
    /// offsets). Default: a temporary directory next to the output.
    #[arg(long)]
    pub tmp: Option<PathBuf>,
    /// Keep cache files after the shuffle.
    #[arg(long)]
    pub keep_tmp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sas,
    Ras,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Sas => Mode::Sas,
            ModeArg::Ras => Mode::Ras,
        }
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Sas)]
    pub mode: ModeArg,
    /// Records per subsample.
    #[arg(long)]
    pub n: usize,
    /// Number of subsamples.
    #[arg(long)]
    pub b: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Only start SAS windows that end before end of file.
    #[arg(long)]
    pub no_wrap: bool,
    /// Pick start lines uniformly by line number instead of by byte offset.
    #[arg(long)]
    pub line_index: bool,
}

impl PlanArgs {
    fn plan(&self) -> SubsamplePlan {
        let mut plan = SubsamplePlan::new(self.n, self.b, self.mode.into(), self.seed.seed);
        if self.no_wrap {
            plan.wrap = WrapPolicy::NoWrap;
        }
        if self.line_index {
            plan.addressing = Addressing::LineIndex;
        }
        plan
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub emit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    /// mean | sin | cv | corr | ols. `corr` uses the first two fields; `ols`
    /// treats the first field as the response.
    #[arg(long, default_value = "mean")]
    pub stat: String,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Cells as `n:B,n:B,..`.
    #[arg(long)]
    pub grid: String,
    /// Comma-separated list of sas, ras.
    #[arg(long, default_value = "sas,ras")]
    pub modes: String,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// warm | cold-best-effort
    #[arg(long, default_value = "warm")]
    pub cache: String,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimModeArg {
    Sas,
    Ras,
    Both,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation setting, 1..=5.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub example: u8,
    /// Records per dataset.
    #[arg(long = "N")]
    pub big_n: u64,
    /// Cells as `n:B,n:B,..`.
    #[arg(long)]
    pub grid: String,
    /// Replications per cell.
    #[arg(long, default_value_t = 200)]
    pub r: usize,
    #[arg(long, value_enum, default_value_t = SimModeArg::Sas)]
    pub mode: SimModeArg,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Reuse one dataset for every replication.
    #[arg(long)]
    pub fixed_data: bool,
    #[arg(long)]
    pub no_wrap: bool,
    /// Scratch directory for generated stores.
    #[arg(long)]
    pub work_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct OlsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    pub block_size: usize,
}

/// Parse `n:B,n:B,..`.
pub fn parse_grid(s: &str) -> Result<Vec<(usize, usize)>> {
    let cells: Result<Vec<_>> = s
        .split(',')
        .filter(|c| !c.trim().is_empty())
        .map(|cell| {
            let bad = || Error::config(format!("malformed grid cell {cell:?}, expected n:B"));
            let (n, b) = cell.trim().split_once(':').ok_or_else(bad)?;
            Ok((n.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        })
        .collect();
    let cells = cells?;
    if cells.is_empty() {
        return Err(Error::config("empty grid"));
    }
    Ok(cells)
}

fn parse_modes(s: &str) -> Result<Vec<Mode>> {
    s.split(',').map(|m| m.trim().parse()).collect()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn effective(line: String) {
    eprintln!("effective: {line}");
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let kind: PopulationKind = a.spec.parse()?;
    effective(format!(
        "gen --spec {} --n-rows {} --seed {} --out {}",
        kind.describe(),
        a.n_rows,
        a.seed.seed,
        a.out.display()
    ));
    let ds = harness::generate_dataset(&PopulationSpec { kind, seed: a.seed.seed }, a.n_rows, &a.out)?;
    eprintln!("wrote {} rows ({})", ds.rows, ds.columns.join(","));
    Ok(())
}

fn cmd_shuffle(a: &ShuffleArgs) -> Result<()> {
    let tmp_holder;
    let tmp = match &a.tmp {
        Some(t) => t.clone(),
        None => {
            let parent = a.output.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            tmp_holder = tempfile::Builder::new().prefix(".shuffle").tempdir_in(parent)?;
            tmp_holder.path().to_path_buf()
        }
    };
    let mut cfg = ShuffleConfig::new(&tmp, a.seed.seed);
    cfg.caches = a.caches;
    cfg.memory_budget = a.memory_budget;
    cfg.keep_temp = a.keep_tmp;
    effective(format!(
        "shuffle --input {} --output {} --caches {} --memory-budget {} --seed {} --tmp {}{}",
        a.input.display(),
        a.output.display(),
        a.caches.map_or("auto".into(), |b| b.to_string()),
        a.memory_budget,
        a.seed.seed,
        tmp.display(),
        if a.keep_tmp { " --keep-tmp" } else { "" }
    ));
    let (_, stats) = shuffler::shuffle(&a.input, &cfg, &a.output)?;
    eprintln!(
        "shuffled {} lines with b = {} caches, peak index {} bytes, partition {:.3}s, materialize {:.3}s",
        stats.lines,
        stats.caches,
        stats.peak_index_bytes(),
        stats.partition_time.as_secs_f64(),
        stats.materialize_time.as_secs_f64()
    );
    Ok(())
}

fn plan_line(a: &PlanArgs) -> String {
    format!(
        "--input {} --mode {} --n {} --b {} --seed {}{}{}",
        a.input.display(),
        Mode::from(a.mode).as_str(),
        a.n,
        a.b,
        a.seed.seed,
        if a.no_wrap { " --no-wrap" } else { "" },
        if a.line_index { " --line-index" } else { "" }
    )
}

fn cmd_sample(a: &SampleArgs) -> Result<()> {
    effective(format!("sample {}", plan_line(&a.plan)));
    let plan = a.plan.plan();
    let mut file = ByteAddressedFile::open(&a.plan.input)?;
    let index = if plan.needs_index() { Some(file.line_index()?) } else { None };
    let mut rng = crate::rng::stream(plan.seed, crate::rng::Role::Sample, 0);
    let batch = draw_batch_with(&mut file, &plan, index.as_ref(), &mut rng)?;
    let mut w = csv::Writer::from_writer(output(a.emit.as_deref())?);
    w.write_record(["subsample", "offset", "line"])?;
    for (i, s) in batch.subsamples.iter().enumerate() {
        for rec in &s.records {
            w.write_record([i.to_string(), rec.origin_offset.to_string(), rec.as_str().into_owned()])?;
        }
    }
    w.flush()?;
    eprintln!(
        "addressing_ops={} hdsc={:e}s (addressing {:e}s, io {:e}s)",
        batch.addressing_ops,
        batch.timing.hdsc(),
        batch.timing.addressing_cost,
        batch.timing.io_cost
    );
    Ok(())
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let kind: StatisticKind = a.stat.parse()?;
    effective(format!("estimate {} --stat {}", plan_line(&a.plan), kind.name()));
    let est = harness::estimate_store(&a.plan.input, &a.plan.plan(), kind)?;
    let mut out = io::stdout().lock();
    writeln!(out, "component,estimate,se2,se")?;
    for (j, (p, s)) in est.point.iter().zip(&est.se2).enumerate() {
        writeln!(out, "{j},{p:e},{s:e},{:e}", s.sqrt())?;
    }
    eprintln!(
        "N={} c={:e} subsamples_used={} excluded={} addressing_ops={} hdsc={:e}s",
        est.records,
        est.c,
        est.used_subsamples,
        est.excluded,
        est.addressing_ops,
        est.timing.hdsc()
    );
    if let Some(p) = est.plugin {
        eprintln!("plug-in estimate g(mean) = {p:e}");
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let mut cfg = BenchConfig::new(parse_grid(&a.grid)?, parse_modes(&a.modes)?, a.reps, a.seed.seed);
    cfg.cache = a.cache.parse::<CacheMode>()?;
    if !a.input.exists() {
        return Err(Error::config(format!("input {} does not exist", a.input.display())));
    }
    effective(format!(
        "bench --input {} --grid {} --modes {} --reps {} --cache {} --seed {}",
        a.input.display(),
        a.grid,
        a.modes,
        a.reps,
        cfg.cache.as_str(),
        a.seed.seed
    ));
    let rows = harness::bench_hdsc(&a.input, &cfg)?;
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    w.write_record(harness::BenchRow::CSV_HEADER)?;
    for r in &rows {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    if rows.iter().any(|r| r.status != "ok") {
        return Err(Error::Malformed("some bench cells failed".into()));
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let example = Example::from_number(a.example)?;
    let grid = parse_grid(&a.grid)?;
    let modes = match a.mode {
        SimModeArg::Sas => vec![Mode::Sas],
        SimModeArg::Ras => vec![Mode::Ras],
        SimModeArg::Both => vec![Mode::Sas, Mode::Ras],
    };
    effective(format!(
        "simulate --example {} --N {} --grid {} --r {} --mode {} --seed {} --jobs {}{}{}",
        a.example,
        a.big_n,
        a.grid,
        a.r,
        a.mode.to_possible_value().expect("mode value").get_name(),
        a.seed.seed,
        a.jobs,
        if a.fixed_data { " --fixed-data" } else { "" },
        if a.no_wrap { " --no-wrap" } else { "" }
    ));
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    w.write_record(MetricsReport::csv_header(example))?;
    let mut failures = 0;
    for &(n, b) in &grid {
        for &mode in &modes {
            let mut cfg = ExperimentConfig::new(example, a.big_n, n, b, a.r, a.seed.seed);
            cfg.mode = mode;
            cfg.jobs = a.jobs;
            cfg.fixed_data = a.fixed_data;
            cfg.work_dir = a.work_dir.clone();
            if a.no_wrap {
                cfg.wrap = WrapPolicy::NoWrap;
            }
            let row = match harness::run_experiment(&cfg) {
                Ok(report) => report.csv_row(),
                Err(e) => {
                    eprintln!("cell n={n} B={b} mode={} failed: {e}", mode.as_str());
                    failures += 1;
                    MetricsReport::failed_csv_row(&cfg, &e)
                }
            };
            w.write_record(&row)?;
            w.flush()?;
        }
    }
    if failures > 0 {
        return Err(Error::Malformed(format!("{failures} simulation cell(s) failed")));
    }
    Ok(())
}

fn cmd_preprocess(a: &PreprocessArgs) -> Result<()> {
    effective(format!("preprocess --input {} --output {}", a.input.display(), a.output.display()));
    let (_, s) = harness::preprocess_flights(&a.input, &a.output)?;
    eprintln!(
        "kept {} rows; dropped {} non-positive, {} missing, {} unparseable",
        s.kept, s.dropped_nonpositive, s.missing, s.unparseable
    );
    Ok(())
}

fn cmd_ols(a: &OlsArgs) -> Result<()> {
    effective(format!("ols --input {} --block-size {}", a.input.display(), a.block_size));
    let fit = harness::chunked_ols(&a.input, a.block_size)?;
    let mut out = io::stdout().lock();
    writeln!(out, "coefficient,estimate")?;
    for (j, b) in fit.coefficients.iter().enumerate() {
        writeln!(out, "beta{j},{b:e}")?;
    }
    eprintln!("{} rows in {} blocks", fit.rows, fit.blocks);
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Open { .. } => 2,
        _ => 1,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Shuffle(a) => cmd_shuffle(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Ols(a) => cmd_ols(a),
    }
}

/// Parse `args` and run, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
