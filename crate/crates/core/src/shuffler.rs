//! Bounded-memory external shuffle of a store file.
//!
//! 1. One sequential pass over `F` sends the header offset of every line to
//!    one of `b` cache files, chosen uniformly at random.
//! 2. The cache files are put in random order.
//! 3. Each cache, in that order, is loaded, shuffled in memory, and its lines
//!    are fetched from `F` by addressing and appended to `F*`.
//!
//! Only one cache of offsets is ever resident, so peak memory is about
//! `8 * N / b` bytes plus one line.
//!
//! Cache files hold fixed-width 8-byte little-endian offsets and are named
//! `cache_{i}.idx`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::line_store::ByteAddressedFile;
use crate::rng::{self, Role, StreamRng};

pub const INDEX_WIDTH: u64 = 8;
pub const DEFAULT_MEMORY_BUDGET: u64 = 64 * 1024 * 1024;
/// Read buffer for the addressing retrievals of step 3. Each retrieval reads
/// a single line, so a large buffer only adds copying.
pub const RETRIEVAL_BUFFER: usize = 4 * 1024;

#[derive(Debug, Clone)]
pub struct ShuffleConfig {
    /// Number of cache files, `b`. `None` picks the smallest `b` whose
    /// expected cache fits `memory_budget`.
    pub caches: Option<usize>,
    pub temp_dir: PathBuf,
    pub seed: u64,
    /// Bytes allowed for one resident cache of offsets.
    pub memory_budget: u64,
    pub keep_temp: bool,
    pub retrieval_buffer: usize,
}

impl ShuffleConfig {
    pub fn new(temp_dir: impl Into<PathBuf>, seed: u64) -> Self {
        ShuffleConfig {
            caches: None,
            temp_dir: temp_dir.into(),
            seed,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            keep_temp: false,
            retrieval_buffer: RETRIEVAL_BUFFER,
        }
    }

    pub fn with_caches(mut self, b: usize) -> Self {
        self.caches = Some(b);
        self
    }
}

/// `ceil(8 N / budget)`, at least 1.
pub fn default_cache_count(lines: u64, memory_budget: u64) -> usize {
    let need = lines.saturating_mul(INDEX_WIDTH);
    need.div_ceil(memory_budget.max(1)).max(1) as usize
}

/// One cache file of header offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexCache {
    pub id: usize,
    pub path: PathBuf,
    pub entries: u64,
}

impl IndexCache {
    pub fn load(&self) -> Result<Vec<u64>> {
        let mut bytes = Vec::with_capacity((self.entries * INDEX_WIDTH) as usize);
        BufReader::new(File::open(&self.path)?).read_to_end(&mut bytes)?;
        if bytes.len() as u64 != self.entries * INDEX_WIDTH {
            return Err(Error::Malformed(format!(
                "{} holds {} bytes, expected {}",
                self.path.display(),
                bytes.len(),
                self.entries * INDEX_WIDTH
            )));
        }
        Ok(bytes
            .chunks_exact(INDEX_WIDTH as usize)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

pub fn cache_path(temp_dir: &Path, i: usize) -> PathBuf {
    temp_dir.join(format!("cache_{i}.idx"))
}

/// Step 1: stream `file` once, sending each header offset to a uniformly
/// chosen cache.
pub fn partition_offsets(
    file: &mut ByteAddressedFile,
    b: usize,
    temp_dir: &Path,
    rng: &mut StreamRng,
) -> Result<Vec<IndexCache>> {
    if b == 0 {
        return Err(Error::config("cache count b must be at least 1"));
    }
    fs::create_dir_all(temp_dir)?;
    let mut writers = Vec::with_capacity(b);
    for i in 0..b {
        let f = File::create(cache_path(temp_dir, i))?;
        writers.push(BufWriter::with_capacity(8 * 1024, f));
    }
    let mut counts = vec![0u64; b];
    file.sequential_scan(|rec| {
        let i = rng.random_range(0..b);
        writers[i].write_all(&rec.origin_offset.to_le_bytes())?;
        counts[i] += 1;
        Ok(())
    })?;
    for w in &mut writers {
        w.flush()?;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(id, entries)| IndexCache {
            id,
            path: cache_path(temp_dir, id),
            entries,
        })
        .collect())
}

/// Step 2: uniform random order of the caches (Fisher–Yates).
pub fn permute_caches(mut caches: Vec<IndexCache>, rng: &mut StreamRng) -> Vec<IndexCache> {
    caches.shuffle(rng);
    caches
}

/// Counters collected while shuffling.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShuffleStats {
    pub lines: u64,
    pub caches: usize,
    /// Largest number of offsets resident at once.
    pub peak_index_entries: u64,
    pub partition_time: Duration,
    pub materialize_time: Duration,
}

impl ShuffleStats {
    pub fn peak_index_bytes(&self) -> u64 {
        self.peak_index_entries * INDEX_WIDTH
    }
}

/// Step 3: write `F*` from the ordered caches. Each cache is shuffled in
/// memory with its own stream (keyed by the cache id) before its lines are
/// fetched from `source`.
pub fn materialize(
    source: &mut ByteAddressedFile,
    caches: &[IndexCache],
    output: &Path,
    seed: u64,
    memory_budget: u64,
) -> Result<(ByteAddressedFile, ShuffleStats)> {
    let mut out = BufWriter::with_capacity(64 * 1024, File::create(output)?);
    let mut stats = ShuffleStats {
        caches: caches.len(),
        ..Default::default()
    };
    let mut line = Vec::with_capacity(256);
    for cache in caches {
        let needed = cache.entries * INDEX_WIDTH;
        if needed > memory_budget {
            return Err(Error::BudgetExceeded {
                entries: cache.entries,
                needed,
                budget: memory_budget,
            });
        }
        let mut offsets = cache.load()?;
        stats.peak_index_entries = stats.peak_index_entries.max(offsets.len() as u64);
        offsets.shuffle(&mut rng::stream(seed, Role::ShuffleWithinCache, cache.id as u64));
        for &offset in &offsets {
            if !source.is_header(offset)? {
                return Err(Error::NotAHeader { offset });
            }
            let cursor = source.seek(offset)?;
            source.read_line_into(cursor, &mut line)?;
            line.push(b'\n');
            out.write_all(&line)?;
            stats.lines += 1;
        }
    }
    out.flush()?;
    drop(out);
    Ok((ByteAddressedFile::open(output)?, stats))
}

/// Full shuffle of `input` into `output`.
pub fn shuffle(
    input: &Path,
    config: &ShuffleConfig,
    output: &Path,
) -> Result<(ByteAddressedFile, ShuffleStats)> {
    let mut source = ByteAddressedFile::open(input)?;
    let b = match config.caches {
        Some(b) => b,
        None => default_cache_count(source.count_lines()?, config.memory_budget),
    };
    if b == 0 {
        return Err(Error::config("cache count b must be at least 1"));
    }
    fs::create_dir_all(&config.temp_dir)?;
    let t0 = Instant::now();
    let caches = partition_offsets(
        &mut source,
        b,
        &config.temp_dir,
        &mut rng::stream(config.seed, Role::ShuffleAssign, 0),
    )?;
    let partition_time = t0.elapsed();
    let ordered = permute_caches(caches, &mut rng::stream(config.seed, Role::ShufflePermute, 0));

    let mut retrieval = ByteAddressedFile::open_with_buffer(input, config.retrieval_buffer)?;
    let t1 = Instant::now();
    let result = materialize(
        &mut retrieval,
        &ordered,
        output,
        config.seed,
        config.memory_budget,
    );
    let materialize_time = t1.elapsed();
    if !config.keep_temp {
        for c in &ordered {
            let _ = fs::remove_file(&c.path);
        }
    }
    let (file, mut stats) = result?;
    stats.partition_time = partition_time;
    stats.materialize_time = materialize_time;
    Ok((file, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn write_store(dir: &Path, name: &str, lines: &[&str]) -> PathBuf {
        let p = dir.join(name);
        let mut s = String::new();
        for l in lines {
            s.push_str(l);
            s.push('\n');
        }
        fs::write(&p, s).unwrap();
        p
    }

    fn lines_of(p: &Path) -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(str::to_owned)
            .collect()
    }

    #[test]
    fn single_cache_holds_every_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_store(dir.path(), "f", &["a", "b", "c", "d", "e", "f"]);
        let mut file = ByteAddressedFile::open(&p).unwrap();
        let caches = partition_offsets(&mut file, 1, dir.path(), &mut rng::stream(1, Role::ShuffleAssign, 0)).unwrap();
        assert_eq!(caches.len(), 1);
        assert_eq!(caches[0].load().unwrap(), vec![0, 2, 4, 6, 8, 10]);
    }

    #[test]
    fn caches_partition_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_store(dir.path(), "f", &["a", "bb", "c", "dd", "e", "ff"]);
        let mut file = ByteAddressedFile::open(&p).unwrap();
        let headers: HashSet<u64> = file.line_index().unwrap().headers().iter().copied().collect();
        let caches = partition_offsets(&mut file, 3, dir.path(), &mut rng::stream(5, Role::ShuffleAssign, 0)).unwrap();
        let mut union = Vec::new();
        for c in &caches {
            union.extend(c.load().unwrap());
        }
        assert_eq!(union.len(), 6);
        assert_eq!(union.into_iter().collect::<HashSet<_>>(), headers);
    }

    #[test]
    fn cache_sizes_are_binomial() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<String> = (0..10_000).map(|i| format!("{i:05}")).collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let p = write_store(dir.path(), "f", &refs);
        let mut file = ByteAddressedFile::open(&p).unwrap();
        let caches = partition_offsets(&mut file, 10, dir.path(), &mut rng::stream(3, Role::ShuffleAssign, 0)).unwrap();
        // Binomial(10^4, 0.1): mean 1000, sd = sqrt(900) = 30.
        for c in &caches {
            assert!((c.entries as f64 - 1000.0).abs() <= 4.0 * 30.0, "{}", c.entries);
        }
    }

    #[test]
    fn permutation_is_identity_for_one_cache_and_deterministic() {
        let mk = |n: usize| -> Vec<IndexCache> {
            (0..n)
                .map(|id| IndexCache { id, path: PathBuf::new(), entries: 0 })
                .collect()
        };
        let one = permute_caches(mk(1), &mut rng::stream(1, Role::ShufflePermute, 0));
        assert_eq!(one[0].id, 0);
        let a: Vec<usize> = permute_caches(mk(3), &mut rng::stream(8, Role::ShufflePermute, 0)).iter().map(|c| c.id).collect();
        let b: Vec<usize> = permute_caches(mk(3), &mut rng::stream(8, Role::ShufflePermute, 0)).iter().map(|c| c.id).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn permutation_frequencies_are_uniform() {
        let mut counts = std::collections::HashMap::new();
        let trials = 10_000;
        for s in 0..trials {
            let caches: Vec<IndexCache> = (0..3)
                .map(|id| IndexCache { id, path: PathBuf::new(), entries: 0 })
                .collect();
            let order: Vec<usize> = permute_caches(caches, &mut rng::stream(s, Role::ShufflePermute, 0))
                .iter()
                .map(|c| c.id)
                .collect();
            *counts.entry(order).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (_, c) in counts {
            let f = c as f64 / trials as f64;
            assert!((f - 1.0 / 6.0).abs() < 0.02, "{f}");
        }
    }

    #[test]
    fn two_lines_one_cache() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_store(dir.path(), "f", &["a", "b"]);
        let out = dir.path().join("out");
        let cfg = ShuffleConfig::new(dir.path().join("tmp"), 11).with_caches(1);
        let (shuffled, stats) = shuffle(&p, &cfg, &out).unwrap();
        let got = lines_of(&out);
        assert!(got == ["a", "b"] || got == ["b", "a"]);
        assert_eq!(shuffled.n_f(), 4);
        assert_eq!(stats.lines, 2);
        assert!(!cache_path(&cfg.temp_dir, 0).exists());
    }

    #[test]
    fn one_line_file_is_unchanged_and_keep_tmp_keeps_caches() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_store(dir.path(), "f", &["only"]);
        let out = dir.path().join("out");
        let mut cfg = ShuffleConfig::new(dir.path().join("tmp"), 2).with_caches(2);
        cfg.keep_temp = true;
        shuffle(&p, &cfg, &out).unwrap();
        assert_eq!(fs::read(&out).unwrap(), b"only\n");
        assert!(cache_path(&cfg.temp_dir, 0).exists());
        assert!(cache_path(&cfg.temp_dir, 1).exists());
    }

    #[test]
    fn deterministic_given_seed() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<String> = (0..500).map(|i| format!("line{i}")).collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let p = write_store(dir.path(), "f", &refs);
        let cfg = ShuffleConfig::new(dir.path().join("tmp"), 99).with_caches(4);
        shuffle(&p, &cfg, &dir.path().join("o1")).unwrap();
        shuffle(&p, &cfg, &dir.path().join("o2")).unwrap();
        assert_eq!(fs::read(dir.path().join("o1")).unwrap(), fs::read(dir.path().join("o2")).unwrap());
        assert_ne!(lines_of(&dir.path().join("o1")), lines);
    }

    #[test]
    fn budget_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<String> = (0..100).map(|i| i.to_string()).collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let p = write_store(dir.path(), "f", &refs);
        let mut cfg = ShuffleConfig::new(dir.path().join("tmp"), 1).with_caches(1);
        cfg.memory_budget = 80;
        assert!(matches!(
            shuffle(&p, &cfg, &dir.path().join("o")),
            Err(Error::BudgetExceeded { entries: 100, .. })
        ));
    }

    #[test]
    fn corrupted_cache_offset_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_store(dir.path(), "f", &["aa", "bb"]);
        let cache = IndexCache { id: 0, path: dir.path().join("c.idx"), entries: 1 };
        fs::write(&cache.path, 1u64.to_le_bytes()).unwrap();
        let mut src = ByteAddressedFile::open(&p).unwrap();
        let err = materialize(&mut src, &[cache], &dir.path().join("o"), 0, DEFAULT_MEMORY_BUDGET).unwrap_err();
        assert!(matches!(err, Error::NotAHeader { offset: 1 }));
    }

    #[test]
    fn default_b_tracks_budget() {
        assert_eq!(default_cache_count(10, DEFAULT_MEMORY_BUDGET), 1);
        assert_eq!(default_cache_count(8 * 1024 * 1024, DEFAULT_MEMORY_BUDGET), 1);
        assert_eq!(default_cache_count(8 * 1024 * 1024 + 1, DEFAULT_MEMORY_BUDGET), 2);
    }
}
