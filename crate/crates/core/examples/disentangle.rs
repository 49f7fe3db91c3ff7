//! How related are the two uncertainty signals? Correlations and two-sample
//! tests between A(x) and E(x) on held-out points.

use tessera::data::{gen_heteroscedastic, split_dataset, Split, SplitFractions, SplitMode};
use tessera::experiment::{fit_moe, ExperimentConfig, MoeOutputs};
use tessera::metrics::disentangle_stats;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = gen_heteroscedastic(4000, 4, &"linear".parse()?, 2)?;
    let ds = split_dataset(&ds, &SplitFractions::default(), SplitMode::Random, 2)?.dataset;
    let mut cfg = ExperimentConfig::default();
    cfg.training.epochs = 30;
    cfg.training.learning_rate = 3e-3;
    let (model, _) = fit_moe(&ds.view(Split::Train), &ds.view(Split::Val), &cfg)?;
    let out = MoeOutputs::compute(&model, &ds.view(Split::Test).x)?;

    let s = disentangle_stats(&out.aleatoric, &out.epistemic)?;
    println!("Pearson  {:.3}", s.pearson);
    println!("Spearman {:.3}", s.spearman);
    println!("Kendall  {:.3}", s.kendall);
    println!("Welch t = {:.2} (p = {:.2e})", s.welch.statistic, s.welch.p_value);
    println!("Mann-Whitney U = {:.2} (p = {:.2e})", s.mann_whitney.statistic, s.mann_whitney.p_value);
    Ok(())
}
