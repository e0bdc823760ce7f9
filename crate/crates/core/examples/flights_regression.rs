// Airline-style pipeline: raw CSV, preprocessing, shuffle, then SAS
// regression next to the full-data least squares fit.

use seqsample::estimators::StatisticKind;
use seqsample::harness::{
    chunked_ols, estimate_store, generate_flights_raw, preprocess_flights, FlightsParams,
    FLIGHTS_COLUMNS,
};
use seqsample::rng::{stream, Role};
use seqsample::sampler::{Mode, SubsamplePlan};
use seqsample::shuffler::{shuffle, ShuffleConfig};

pub fn run_example() -> seqsample::Result<()> {
    let dir = tempfile::tempdir()?;
    let raw = dir.path().join("raw.csv");
    generate_flights_raw(&FlightsParams::default(), 200_000, stream(2008, Role::Data, 0), &raw)?;

    let store = dir.path().join("flights.csv");
    let (_, summary) = preprocess_flights(&raw, &store)?;
    println!(
        "kept {} rows, dropped {} non-positive and {} missing",
        summary.kept, summary.dropped_nonpositive, summary.missing
    );

    let shuffled = dir.path().join("flights.shuf");
    shuffle(&store, &ShuffleConfig::new(dir.path().join("tmp"), 1), &shuffled)?;
    let ols = chunked_ols(&store, 50_000)?;
    let sas = estimate_store(
        &shuffled,
        &SubsamplePlan::new(2_000, 50, Mode::Sas, 3),
        StatisticKind::OlsCoefficients,
    )?;

    println!("{:<10} {:>9} {:>9} {:>8}", "term", "OLS", "SAS", "SE");
    let names = std::iter::once("intercept").chain(FLIGHTS_COLUMNS[1..].iter().copied());
    for (j, name) in names.enumerate() {
        println!(
            "{name:<10} {:>9.4} {:>9.4} {:>8.4}",
            ols.coefficients[j],
            sas.point[j],
            sas.se2[j].sqrt()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> seqsample::Result<()> {
    run_example()
}
