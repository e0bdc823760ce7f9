//! Random addressing (RAS) and sequential addressing (SAS) subsampling.
//!
//! Both samplers draw a byte offset uniformly from `0..=n_f`, seek to it and
//! realign to the next line header (see [`crate::line_store`] for the
//! strictly-after rule). RAS repeats that for every record; SAS does it once
//! and then reads `n` consecutive lines, wrapping at end of file.
//!
//! Every subsample records how many random seeks it performed and how long
//! was spent positioning (addressing cost) versus transferring bytes (I/O
//! cost). Their sum is the hard drive sampling cost (HDSC).

use std::ops::{Add, AddAssign};
use std::time::Instant;

use rand::Rng;

use crate::error::{Error, Result};
use crate::line_store::{ByteAddressedFile, LineCursor, LineIndex, Record};
use crate::rng::{self, Role, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Ras,
    Sas,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ras => "ras",
            Mode::Sas => "sas",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ras" => Ok(Mode::Ras),
            "sas" => Ok(Mode::Sas),
            other => Err(Error::config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Whether a SAS window may run past end of file and continue at line 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WrapPolicy {
    #[default]
    Wrap,
    /// Redraw start offsets whose window would wrap, so that only the
    /// `N - n + 1` non-wrapping windows can be chosen. Needs a [`LineIndex`].
    NoWrap,
}

/// How a start position is turned into a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Addressing {
    /// Uniform byte offset, realigned to the next header.
    #[default]
    Byte,
    /// Uniform line number looked up in a [`LineIndex`]. Removes the
    /// byte-length selection bias for variable-width stores.
    LineIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsamplePlan {
    /// Records per subsample.
    pub n: usize,
    /// Number of subsamples, `B`.
    pub b: usize,
    pub mode: Mode,
    pub seed: u64,
    pub wrap: WrapPolicy,
    pub addressing: Addressing,
}

impl SubsamplePlan {
    pub fn new(n: usize, b: usize, mode: Mode, seed: u64) -> Self {
        SubsamplePlan {
            n,
            b,
            mode,
            seed,
            wrap: WrapPolicy::Wrap,
            addressing: Addressing::Byte,
        }
    }

    pub fn needs_index(&self) -> bool {
        self.wrap == WrapPolicy::NoWrap || self.addressing == Addressing::LineIndex
    }

    /// Check the plan against a store of `lines` records.
    pub fn validate(&self, lines: u64) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("subsample size n must be at least 1"));
        }
        if self.b < 2 {
            return Err(Error::config("number of subsamples B must be at least 2"));
        }
        if self.n as u64 > lines {
            return Err(Error::config(format!(
                "subsample size n = {} exceeds the {} records of the store",
                self.n, lines
            )));
        }
        Ok(())
    }
}

/// Seconds spent positioning and reading.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimingBreakdown {
    pub addressing_cost: f64,
    pub io_cost: f64,
}

impl TimingBreakdown {
    pub fn hdsc(&self) -> f64 {
        self.addressing_cost + self.io_cost
    }
}

impl Add for TimingBreakdown {
    type Output = TimingBreakdown;

    fn add(self, rhs: Self) -> Self {
        TimingBreakdown {
            addressing_cost: self.addressing_cost + rhs.addressing_cost,
            io_cost: self.io_cost + rhs.io_cost,
        }
    }
}

impl AddAssign for TimingBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    pub records: Vec<Record>,
    /// The drawn offset `p_b` (for RAS, the first draw; for line addressing,
    /// the header of the first line).
    pub start_offset: u64,
    /// Random seeks performed: `n` for RAS, 1 for SAS.
    pub addressing_ops: u64,
    pub timing: TimingBreakdown,
}

/// Uniform integer on `0..=n_f`.
pub fn draw_start_offset<R: Rng + ?Sized>(rng: &mut R, n_f: u64) -> u64 {
    rng.random_range(0..=n_f)
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Random addressing: `n` independent draws, each `{draw p_b, seek, realign,
/// read}`. Records may repeat.
pub fn ras_subsample<R: Rng + ?Sized>(
    file: &mut ByteAddressedFile,
    n: usize,
    rng: &mut R,
) -> Result<Subsample> {
    let mut records = Vec::with_capacity(n);
    let mut timing = TimingBreakdown::default();
    let mut start_offset = 0;
    for i in 0..n {
        let p_b = draw_start_offset(rng, file.n_f());
        if i == 0 {
            start_offset = p_b;
        }
        let t = Instant::now();
        let cursor = file.seek(p_b)?;
        let header = file.advance_to_next_header(cursor)?;
        timing.addressing_cost += secs(t);
        let t = Instant::now();
        let (record, _) = file.read_line(header)?;
        timing.io_cost += secs(t);
        records.push(record);
    }
    Ok(Subsample {
        records,
        start_offset,
        addressing_ops: n as u64,
        timing,
    })
}

/// Sequential addressing: one draw and one seek, then `n` consecutive lines
/// in circular order.
pub fn sas_subsample<R: Rng + ?Sized>(
    file: &mut ByteAddressedFile,
    n: usize,
    rng: &mut R,
) -> Result<Subsample> {
    let p_b = draw_start_offset(rng, file.n_f());
    let t = Instant::now();
    let cursor = file.seek(p_b)?;
    let header = file.advance_to_next_header(cursor)?;
    let addressing_cost = secs(t);
    read_run(file, header, n, p_b, addressing_cost)
}

fn read_run(
    file: &mut ByteAddressedFile,
    mut cursor: LineCursor,
    n: usize,
    start_offset: u64,
    addressing_cost: f64,
) -> Result<Subsample> {
    let mut records = Vec::with_capacity(n);
    let t = Instant::now();
    for _ in 0..n {
        let (record, next) = file.read_line(cursor)?;
        records.push(record);
        cursor = next;
    }
    let io_cost = secs(t);
    Ok(Subsample {
        records,
        start_offset,
        addressing_ops: 1,
        timing: TimingBreakdown {
            addressing_cost,
            io_cost,
        },
    })
}

/// SAS with an index: supports the no-wrap policy and line-uniform starts.
/// Rejected draws are index lookups only and never touch the disk, so the
/// subsample still costs a single seek.
pub fn sas_subsample_indexed<R: Rng + ?Sized>(
    file: &mut ByteAddressedFile,
    index: &LineIndex,
    n: usize,
    rng: &mut R,
    wrap: WrapPolicy,
    addressing: Addressing,
) -> Result<Subsample> {
    let lines = index.len();
    if n == 0 || n > lines {
        return Err(Error::config(format!(
            "subsample size {n} not in 1..={lines}"
        )));
    }
    let last_start = lines - n;
    let t;
    let header;
    let start_offset;
    match addressing {
        Addressing::Byte => {
            let p_b = loop {
                let p_b = draw_start_offset(rng, file.n_f());
                if wrap == WrapPolicy::Wrap || index.line_after(p_b) <= last_start {
                    break p_b;
                }
            };
            t = Instant::now();
            let cursor = file.seek(p_b)?;
            header = file.advance_to_next_header(cursor)?;
            start_offset = p_b;
        }
        Addressing::LineIndex => {
            let upper = match wrap {
                WrapPolicy::Wrap => lines - 1,
                WrapPolicy::NoWrap => last_start,
            };
            let k = rng.random_range(0..=upper);
            t = Instant::now();
            header = file.seek(index.headers()[k])?;
            start_offset = header.position;
        }
    }
    let addressing_cost = secs(t);
    read_run(file, header, n, start_offset, addressing_cost)
}

/// RAS with line-uniform addressing.
pub fn ras_subsample_indexed<R: Rng + ?Sized>(
    file: &mut ByteAddressedFile,
    index: &LineIndex,
    n: usize,
    rng: &mut R,
) -> Result<Subsample> {
    let mut records = Vec::with_capacity(n);
    let mut timing = TimingBreakdown::default();
    let mut start_offset = 0;
    for i in 0..n {
        let k = rng.random_range(0..index.len());
        let t = Instant::now();
        let cursor = file.seek(index.headers()[k])?;
        timing.addressing_cost += secs(t);
        if i == 0 {
            start_offset = cursor.position;
        }
        let t = Instant::now();
        let (record, _) = file.read_line(cursor)?;
        timing.io_cost += secs(t);
        records.push(record);
    }
    Ok(Subsample {
        records,
        start_offset,
        addressing_ops: n as u64,
        timing,
    })
}

/// `B` independent subsamples with their summed timing.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub subsamples: Vec<Subsample>,
    pub addressing_ops: u64,
    pub timing: TimingBreakdown,
}

/// Draw a batch. Builds a [`LineIndex`] with one sequential pass when the
/// plan needs one; use [`draw_batch_with`] to reuse an index.
pub fn draw_batch(file: &mut ByteAddressedFile, plan: &SubsamplePlan) -> Result<Batch> {
    let index = if plan.needs_index() {
        Some(file.line_index()?)
    } else {
        None
    };
    let mut rng = rng::stream(plan.seed, Role::Sample, 0);
    draw_batch_with(file, plan, index.as_ref(), &mut rng)
}

pub fn draw_batch_with(
    file: &mut ByteAddressedFile,
    plan: &SubsamplePlan,
    index: Option<&LineIndex>,
    rng: &mut StreamRng,
) -> Result<Batch> {
    if plan.n == 0 {
        return Err(Error::config("subsample size n must be at least 1"));
    }
    if plan.b < 2 {
        return Err(Error::config("number of subsamples B must be at least 2"));
    }
    if let Some(index) = index {
        plan.validate(index.len() as u64)?;
    }
    let mut subsamples = Vec::with_capacity(plan.b);
    for _ in 0..plan.b {
        let s = match (plan.mode, plan.needs_index(), index) {
            (Mode::Ras, false, _) => ras_subsample(file, plan.n, rng)?,
            (Mode::Sas, false, _) => sas_subsample(file, plan.n, rng)?,
            (Mode::Ras, true, Some(ix)) => {
                if plan.addressing == Addressing::LineIndex {
                    ras_subsample_indexed(file, ix, plan.n, rng)?
                } else {
                    ras_subsample(file, plan.n, rng)?
                }
            }
            (Mode::Sas, true, Some(ix)) => {
                sas_subsample_indexed(file, ix, plan.n, rng, plan.wrap, plan.addressing)?
            }
            (_, true, None) => {
                return Err(Error::config(
                    "no-wrap and line-index addressing need a line index",
                ))
            }
        };
        subsamples.push(s);
    }
    let addressing_ops = subsamples.iter().map(|s| s.addressing_ops).sum();
    let timing = subsamples
        .iter()
        .fold(TimingBreakdown::default(), |acc, s| acc + s.timing);
    Ok(Batch {
        subsamples,
        addressing_ops,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use std::io::Write;

    fn store(content: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content).unwrap();
        f.flush().unwrap();
        f
    }

    /// An rng whose next `random_range(0..=n_f)` returns a fixed value.
    fn forced_offset(n_f: u64, want: u64) -> StreamRng {
        for s in 0..100_000 {
            let mut r = StreamRng::seed_from_u64(s);
            if draw_start_offset(&mut r, n_f) == want {
                return StreamRng::seed_from_u64(s);
            }
        }
        panic!("no seed found");
    }

    fn raws(s: &Subsample) -> Vec<String> {
        s.records.iter().map(|r| r.as_str().into_owned()).collect()
    }

    #[test]
    fn start_offsets_are_reproducible_and_uniform() {
        let a = draw_start_offset(&mut rng::stream(4, Role::Sample, 0), 1000);
        let b = draw_start_offset(&mut rng::stream(4, Role::Sample, 0), 1000);
        assert_eq!(a, b);
        let mut rng = rng::stream(1, Role::Sample, 0);
        let mut counts = [0u32; 10];
        let draws = 100_000;
        for _ in 0..draws {
            counts[draw_start_offset(&mut rng, 9) as usize] += 1;
        }
        // Binomial(1e5, 0.1): sd of the frequency is about 0.00095.
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.1).abs() < 0.01);
        }
    }

    #[test]
    fn ras_single_line_file_always_wraps_to_it() {
        let f = store(b"42\n");
        let mut file = ByteAddressedFile::open(f.path()).unwrap();
        let mut rng = rng::stream(3, Role::Sample, 0);
        for _ in 0..20 {
            let s = ras_subsample(&mut file, 1, &mut rng).unwrap();
            assert_eq!(raws(&s), ["42"]);
            assert_eq!(s.addressing_ops, 1);
        }
    }

    #[test]
    fn ras_records_are_realignments_of_independent_draws() {
        let f = store(b"a\nbb\nccc\ndddd\n");
        let mut file = ByteAddressedFile::open(f.path()).unwrap();
        let index = file.line_index().unwrap();
        let s = ras_subsample(&mut file, 3, &mut rng::stream(21, Role::Sample, 0)).unwrap();
        let mut replay = rng::stream(21, Role::Sample, 0);
        for rec in &s.records {
            let p = draw_start_offset(&mut replay, file.n_f());
            assert_eq!(rec.origin_offset, index.headers()[index.line_after(p)]);
        }
        assert_eq!(s.addressing_ops, 3);
    }

    #[test]
    fn sas_reads_consecutive_lines_and_wraps() {
        let f = store(b"a\nb\nc\n");
        let mut file = ByteAddressedFile::open(f.path()).unwrap();
        // p_b = 0 realigns to "b".
        let s = sas_subsample(&mut file, 2, &mut forced_offset(6, 0)).unwrap();
        assert_eq!(raws(&s), ["b", "c"]);
        assert_eq!(s.addressing_ops, 1);
        // p_b = 5 is inside "c": wrap to "a".
        let s = sas_subsample(&mut file, 2, &mut forced_offset(6, 5)).unwrap();
        assert_eq!(raws(&s), ["a", "b"]);
        // n = N covers every line once.
        let s = sas_subsample(&mut file, 3, &mut forced_offset(6, 3)).unwrap();
        assert_eq!(raws(&s), ["c", "a", "b"]);
    }

    #[test]
    fn batch_addressing_counts() {
        let content: String = (0..50).map(|i| format!("{i:03}\n")).collect();
        let f = store(content.as_bytes());
        let mut file = ByteAddressedFile::open(f.path()).unwrap();
        let sas = draw_batch(&mut file, &SubsamplePlan::new(5, 2, Mode::Sas, 1)).unwrap();
        assert_eq!(sas.addressing_ops, 2);
        let ras = draw_batch(&mut file, &SubsamplePlan::new(5, 2, Mode::Ras, 1)).unwrap();
        assert_eq!(ras.addressing_ops, 10);
        let t = ras.timing;
        assert_eq!(t.hdsc(), t.addressing_cost + t.io_cost);
        assert!(t.addressing_cost >= 0.0 && t.io_cost >= 0.0);
    }

    #[test]
    fn plan_validation() {
        assert!(SubsamplePlan::new(0, 2, Mode::Sas, 0).validate(10).is_err());
        assert!(SubsamplePlan::new(1, 1, Mode::Sas, 0).validate(10).is_err());
        assert!(SubsamplePlan::new(11, 2, Mode::Sas, 0).validate(10).is_err());
        assert!(SubsamplePlan::new(10, 2, Mode::Sas, 0).validate(10).is_ok());
    }

    #[test]
    fn no_wrap_never_wraps() {
        let content: String = (0..20).map(|i| format!("{i:02}\n")).collect();
        let f = store(content.as_bytes());
        let mut file = ByteAddressedFile::open(f.path()).unwrap();
        let mut plan = SubsamplePlan::new(15, 200, Mode::Sas, 5);
        plan.wrap = WrapPolicy::NoWrap;
        let batch = draw_batch(&mut file, &plan).unwrap();
        let mut starts = std::collections::HashSet::new();
        for s in &batch.subsamples {
            let first: u32 = s.records[0].as_str().parse().unwrap();
            let last: u32 = s.records[14].as_str().parse().unwrap();
            assert_eq!(last, first + 14);
            starts.insert(first);
        }
        assert_eq!(starts.len(), 6);
        assert_eq!(batch.addressing_ops, 200);
    }

    #[test]
    fn line_index_addressing_is_line_uniform() {
        // Very uneven line lengths: byte addressing would be heavily biased.
        let f = store(b"a\nbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbb\nc\nd\n");
        let mut file = ByteAddressedFile::open(f.path()).unwrap();
        let index = file.line_index().unwrap();
        let mut rng = rng::stream(2, Role::Sample, 0);
        let mut counts = [0u32; 4];
        for _ in 0..8000 {
            let s = ras_subsample_indexed(&mut file, &index, 1, &mut rng).unwrap();
            let line = index.headers().iter().position(|&h| h == s.records[0].origin_offset).unwrap();
            counts[line] += 1;
        }
        for c in counts {
            assert!((c as f64 / 8000.0 - 0.25).abs() < 0.03, "{counts:?}");
        }
    }
}
