//! Expert disagreement under covariate shift: train on some clusters, test on
//! clusters pushed away from the training data, and compare E(x).

use tessera::data::{gen_clustered_shift, ClusterShiftConfig, Split};
use tessera::experiment::{fit_moe, ExperimentConfig, MoeOutputs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = ClusterShiftConfig { n: 3000, far_offset: 3.0, seed: 5, ..ClusterShiftConfig::default() };
    let ds = gen_clustered_shift(&data)?;
    let mut cfg = ExperimentConfig::default();
    cfg.training.epochs = 40;
    cfg.training.learning_rate = 3e-3;
    let (model, _) = fit_moe(&ds.view(Split::Train), &ds.view(Split::Val), &cfg)?;

    for split in [Split::Val, Split::Test] {
        let view = ds.view(split);
        let out = MoeOutputs::compute(&model, &view.x)?;
        let mean_e = out.epistemic.iter().sum::<f64>() / out.len() as f64;
        let mean_a = out.aleatoric.iter().sum::<f64>() / out.len() as f64;
        let groups = view.groups.as_ref().unwrap();
        let mut names: Vec<&String> = groups.iter().collect();
        names.sort();
        names.dedup();
        println!("{split:<5} mean E = {mean_e:.4}, mean A = {mean_a:.4}, clusters {names:?}");
    }
    Ok(())
}
