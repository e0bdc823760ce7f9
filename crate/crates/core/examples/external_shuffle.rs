// Shuffle a store with a small offset budget and check nothing was lost.

use seqsample::harness::{generate_dataset, PopulationKind, PopulationSpec};
use seqsample::shuffler::{shuffle, ShuffleConfig};

pub fn run_example() -> seqsample::Result<()> {
    let dir = tempfile::tempdir()?;
    let raw = dir.path().join("data.csv");
    let spec = PopulationSpec {
        kind: PopulationKind::Normal { mu: 0.0, sigma2: 1.0 },
        seed: 3,
    };
    generate_dataset(&spec, 50_000, &raw)?;

    let mut config = ShuffleConfig::new(dir.path().join("caches"), 11);
    // 32 KiB of offsets resident at a time.
    config.memory_budget = 32 * 1024;
    let shuffled = dir.path().join("data.shuf");
    let (_, stats) = shuffle(&raw, &config, &shuffled)?;
    println!(
        "{} lines, b = {} caches, peak index {} bytes (budget {})",
        stats.lines,
        stats.caches,
        stats.peak_index_bytes(),
        config.memory_budget
    );

    let mut before: Vec<String> = std::fs::read_to_string(&raw)?.lines().map(String::from).collect();
    let mut after: Vec<String> = std::fs::read_to_string(&shuffled)?.lines().map(String::from).collect();
    println!("first lines before: {:?}", &before[..3]);
    println!("first lines after:  {:?}", &after[..3]);
    before.sort();
    after.sort();
    assert_eq!(before, after);
    println!("same multiset of lines");
    Ok(())
}

#[allow(dead_code)]
fn main() -> seqsample::Result<()> {
    run_example()
}
