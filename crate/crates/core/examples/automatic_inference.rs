// Standard errors from a single batch, compared with the closed-form
// variance of the combined mean and with the spread across replications.

use seqsample::harness::{run_experiment, Example, ExperimentConfig};

pub fn run_example() -> seqsample::Result<()> {
    let config = ExperimentConfig::new(Example::One, 20_000, 100, 50, 40, 17);
    let report = run_experiment(&config)?;
    let c = &report.components[0];
    println!("N = {}, n = {}, B = {}, R = {}", config.big_n, config.n, config.b, config.r);
    println!("Var* (closed form)         {:.3e}", c.var_star.unwrap());
    println!("Var across replications    {:.3e}", c.var.unwrap());
    println!("mean SE^2 (single batches) {:.3e}", c.se2);
    println!(
        "SE^2/Var* = {:.3} (sd {:.3}), Var/Var* = {:.3}",
        c.ratio_se2_varstar_mean.unwrap(),
        c.ratio_se2_varstar_sd.unwrap(),
        c.ratio_var_varstar.unwrap()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> seqsample::Result<()> {
    run_example()
}
