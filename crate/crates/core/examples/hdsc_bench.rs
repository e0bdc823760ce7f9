// Time RAS and SAS batches on a generated store. Pass a row count to use
// a bigger file, e.g. `cargo run --release --example hdsc_bench 10000000`.

use seqsample::harness::{bench_hdsc, generate_dataset, BenchConfig, BenchRow, PopulationKind, PopulationSpec};
use seqsample::sampler::Mode;

pub fn run_example() -> seqsample::Result<()> {
    let rows: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(300_000);
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("store.csv");
    let spec = PopulationSpec {
        kind: PopulationKind::Normal { mu: 0.0, sigma2: 1.0 },
        seed: 4,
    };
    generate_dataset(&spec, rows, &path)?;

    let config = BenchConfig::new(vec![(1_000, 10), (1_000, 50), (5_000, 50)], vec![Mode::Sas, Mode::Ras], 3, 4);
    let mut out = csv::Writer::from_writer(std::io::stdout());
    out.write_record(BenchRow::CSV_HEADER)?;
    for row in bench_hdsc(&path, &config)? {
        out.write_record(row.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> seqsample::Result<()> {
    run_example()
}
