//! Serial HDSC timing of RAS and SAS batches over an existing store.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::line_store::{ByteAddressedFile, DEFAULT_BUFFER_SIZE};
use crate::rng::{self, Role};
use crate::sampler::{draw_batch_with, Mode, SubsamplePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CacheMode {
    /// Whatever the page cache holds.
    #[default]
    Warm,
    /// Ask the kernel to drop cached pages of the store before every
    /// repetition. Not all platforms honour the request.
    ColdBestEffort,
}

impl CacheMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheMode::Warm => "warm",
            CacheMode::ColdBestEffort => "cold-best-effort",
        }
    }
}

impl std::str::FromStr for CacheMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warm" => Ok(CacheMode::Warm),
            "cold-best-effort" | "cold" => Ok(CacheMode::ColdBestEffort),
            _ => Err(Error::config(format!("unknown cache mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// `(n, B)` cells.
    pub grid: Vec<(usize, usize)>,
    pub modes: Vec<Mode>,
    pub reps: usize,
    pub cache: CacheMode,
    pub seed: u64,
    pub read_buffer: usize,
}

impl BenchConfig {
    pub fn new(grid: Vec<(usize, usize)>, modes: Vec<Mode>, reps: usize, seed: u64) -> Self {
        BenchConfig {
            grid,
            modes,
            reps,
            cache: CacheMode::Warm,
            seed,
            read_buffer: DEFAULT_BUFFER_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub b: usize,
    pub mode: Mode,
    pub reps: usize,
    /// Seconds, averaged over repetitions.
    pub mean_hdsc: f64,
    pub mean_addressing: f64,
    pub mean_io: f64,
    pub addressing_ops: u64,
    pub cache_mode: CacheMode,
    pub status: String,
}

impl BenchRow {
    pub const CSV_HEADER: [&'static str; 10] = [
        "n",
        "B",
        "mode",
        "reps",
        "mean_hdsc_s",
        "mean_addressing_s",
        "mean_io_s",
        "addressing_ops",
        "cache_mode",
        "status",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.b.to_string(),
            self.mode.as_str().into(),
            self.reps.to_string(),
            format!("{:e}", self.mean_hdsc),
            format!("{:e}", self.mean_addressing),
            format!("{:e}", self.mean_io),
            self.addressing_ops.to_string(),
            self.cache_mode.as_str().into(),
            self.status.clone(),
        ]
    }
}

#[cfg(target_os = "linux")]
fn drop_page_cache(path: &Path) -> Result<()> {
    use std::os::unix::io::AsRawFd;
    let f = File::open(path)?;
    f.sync_all()?;
    // Advisory; the return value only says whether the hint was accepted.
    unsafe {
        libc::posix_fadvise(f.as_raw_fd(), 0, 0, libc::POSIX_FADV_DONTNEED);
    }
    Ok(())
}

#[cfg(not(target_os = "linux"))]
fn drop_page_cache(path: &Path) -> Result<()> {
    File::open(path)?.sync_all()?;
    Ok(())
}

fn bench_cell(path: &Path, config: &BenchConfig, cell: usize, n: usize, b: usize, mode: Mode) -> Result<BenchRow> {
    let plan = SubsamplePlan::new(n, b, mode, config.seed);
    let (mut hdsc, mut addr, mut io) = (0.0, 0.0, 0.0);
    let mut ops = None;
    for rep in 0..config.reps {
        if config.cache == CacheMode::ColdBestEffort {
            drop_page_cache(path)?;
        }
        let mut file = ByteAddressedFile::open_with_buffer(path, config.read_buffer)?;
        let mut rng = rng::stream(config.seed, Role::Bench, (cell * config.reps + rep) as u64);
        let batch = draw_batch_with(&mut file, &plan, None, &mut rng)?;
        hdsc += batch.timing.hdsc();
        addr += batch.timing.addressing_cost;
        io += batch.timing.io_cost;
        match ops {
            None => ops = Some(batch.addressing_ops),
            Some(o) if o != batch.addressing_ops => {
                return Err(Error::Malformed("addressing count changed between repetitions".into()))
            }
            _ => {}
        }
    }
    let r = config.reps as f64;
    Ok(BenchRow {
        n,
        b,
        mode,
        reps: config.reps,
        mean_hdsc: hdsc / r,
        mean_addressing: addr / r,
        mean_io: io / r,
        addressing_ops: ops.unwrap_or(0),
        cache_mode: config.cache,
        status: "ok".into(),
    })
}

/// Time every `(n, B)` cell in every mode, strictly one after another.
/// Fails up front if the store holds fewer than `n * B` lines for some cell;
/// later per-cell failures are reported in the row status.
pub fn bench_hdsc(path: &Path, config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.reps == 0 {
        return Err(Error::config("at least one repetition is needed"));
    }
    if config.grid.is_empty() || config.modes.is_empty() {
        return Err(Error::config("empty grid or mode list"));
    }
    let lines = ByteAddressedFile::open(path)?.count_lines()?;
    for &(n, b) in &config.grid {
        SubsamplePlan::new(n, b, Mode::Sas, 0).validate(lines)?;
        if (n as u64).saturating_mul(b as u64) > lines {
            return Err(Error::config(format!(
                "cell n = {n}, B = {b} needs {} lines but the store has {lines}",
                n as u64 * b as u64
            )));
        }
    }
    let mut rows = Vec::new();
    let mut cell = 0;
    for &(n, b) in &config.grid {
        for &mode in &config.modes {
            let row = bench_cell(path, config, cell, n, b, mode).unwrap_or_else(|e| BenchRow {
                n,
                b,
                mode,
                reps: config.reps,
                mean_hdsc: f64::NAN,
                mean_addressing: f64::NAN,
                mean_io: f64::NAN,
                addressing_ops: 0,
                cache_mode: config.cache,
                status: format!("failed: {e}"),
            });
            rows.push(row);
            cell += 1;
        }
    }
    Ok(rows)
}
