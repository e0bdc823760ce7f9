// A small replicated grid written as CSV, one row per (n, B) cell.

use seqsample::harness::{run_experiment, Example, ExperimentConfig, MetricsReport};
use seqsample::sampler::Mode;

pub fn run_example() -> seqsample::Result<()> {
    let mut out = csv::Writer::from_writer(std::io::stdout());
    out.write_record(MetricsReport::csv_header(Example::Two))?;
    for (n, b) in [(100, 10), (100, 50), (500, 10)] {
        for mode in [Mode::Sas, Mode::Ras] {
            let mut config = ExperimentConfig::new(Example::Two, 10_000, n, b, 20, 42);
            config.mode = mode;
            out.write_record(run_experiment(&config)?.csv_row())?;
        }
    }
    out.flush()?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> seqsample::Result<()> {
    run_example()
}
