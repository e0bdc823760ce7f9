// Non-linear statistics on one shuffled store: sin of the mean, the
// coefficient of variation and a correlation.

use seqsample::estimators::StatisticKind;
use seqsample::harness::{estimate_store, generate_dataset, PopulationKind, PopulationSpec};
use seqsample::sampler::{Mode, SubsamplePlan};
use seqsample::shuffler::{shuffle, ShuffleConfig};

pub fn run_example() -> seqsample::Result<()> {
    let dir = tempfile::tempdir()?;
    let plan = SubsamplePlan::new(1_000, 50, Mode::Sas, 5);

    let normal = dir.path().join("normal.csv");
    generate_dataset(
        &PopulationSpec { kind: PopulationKind::Normal { mu: 1.0, sigma2: 1.0 }, seed: 8 },
        100_000,
        &normal,
    )?;
    let normal_shuf = dir.path().join("normal.shuf");
    shuffle(&normal, &ShuffleConfig::new(dir.path().join("t1"), 8), &normal_shuf)?;
    for kind in [StatisticKind::SinMean, StatisticKind::Cv] {
        let est = estimate_store(&normal_shuf, &plan, kind)?;
        println!(
            "{:<4} {:.4} +/- {:.4}  (excluded subsamples: {})",
            kind.name(),
            est.point[0],
            est.se2[0].sqrt(),
            est.excluded
        );
        if let Some(p) = est.plugin {
            println!("     plug-in g(mean) = {p:.4}");
        }
    }

    let pairs = dir.path().join("pairs.csv");
    let kind: PopulationKind = "bivariate:0,0,1,1,0.5".parse()?;
    generate_dataset(&PopulationSpec { kind, seed: 9 }, 100_000, &pairs)?;
    let pairs_shuf = dir.path().join("pairs.shuf");
    shuffle(&pairs, &ShuffleConfig::new(dir.path().join("t2"), 9), &pairs_shuf)?;
    let est = estimate_store(&pairs_shuf, &plan, StatisticKind::Correlation)?;
    println!("corr {:.4} +/- {:.4}", est.point[0], est.se2[0].sqrt());
    Ok(())
}

#[allow(dead_code)]
fn main() -> seqsample::Result<()> {
    run_example()
}
