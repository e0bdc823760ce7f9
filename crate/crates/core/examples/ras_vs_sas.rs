// One batch each way from the same store: same estimand, very different
// numbers of seeks.

use seqsample::estimators::{combine, StatisticKind};
use seqsample::harness::{generate_dataset, statistics_for_batch, PopulationKind, PopulationSpec};
use seqsample::line_store::ByteAddressedFile;
use seqsample::sampler::{draw_batch, Mode, SubsamplePlan};
use seqsample::shuffler::{shuffle, ShuffleConfig};

pub fn run_example() -> seqsample::Result<()> {
    let dir = tempfile::tempdir()?;
    let raw = dir.path().join("data.csv");
    let spec = PopulationSpec {
        kind: PopulationKind::Normal { mu: 2.0, sigma2: 4.0 },
        seed: 1,
    };
    let big_n = 200_000;
    generate_dataset(&spec, big_n, &raw)?;
    let shuffled = dir.path().join("data.shuf");
    shuffle(&raw, &ShuffleConfig::new(dir.path().join("tmp"), 2), &shuffled)?;

    let mut file = ByteAddressedFile::open(&shuffled)?;
    for mode in [Mode::Ras, Mode::Sas] {
        let plan = SubsamplePlan::new(500, 40, mode, 9);
        let batch = draw_batch(&mut file, &plan)?;
        let (stats, _, _) = statistics_for_batch(&batch, StatisticKind::Mean)?;
        let est = combine(&stats, plan.n, big_n)?;
        println!(
            "{}: mean {:.4} (SE {:.4}), {} seeks, HDSC {:.2} ms",
            mode.as_str(),
            est.point[0],
            est.se2[0].sqrt(),
            batch.addressing_ops,
            batch.timing.hdsc() * 1e3
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> seqsample::Result<()> {
    run_example()
}
