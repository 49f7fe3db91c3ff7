//! Train the mixture-of-experts regressor on step-noise data and inspect the
//! two uncertainty signals it produces.

use tessera::data::{gen_heteroscedastic, split_dataset, NoiseProfile, Split, SplitFractions, SplitMode};
use tessera::moe::{load_checkpoint, save_checkpoint, train_moe, MoeConfig, MoeModel, TrainConfig};
use tessera::numerics::{Matrix, Rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let noise = NoiseProfile::Step { low: 0.2, high: 1.0, threshold: 0.0 };
    let ds = gen_heteroscedastic(3000, 2, &noise, 1)?;
    let ds = split_dataset(&ds, &SplitFractions::default(), SplitMode::Random, 1)?.dataset;
    let (train, val) = (ds.view(Split::Train), ds.view(Split::Val));

    let model = MoeModel::new(2, &MoeConfig::default(), &mut Rng::new(1))?;
    let cfg = TrainConfig { epochs: 40, learning_rate: 3e-3, seed: 1, ..TrainConfig::default() };
    let (model, history) = train_moe(model, (&train.x, &train.y), (&val.x, &val.y), &cfg)?;
    println!(
        "validation NLL {:.3} -> {:.3} (best epoch {})",
        history.initial_val_nll, history.best_val_nll, history.best_epoch
    );

    let probes = Matrix::from_rows(&[vec![-0.5, 0.0], vec![0.5, 0.0], vec![3.0, 3.0]])?;
    println!("{:>12} {:>8} {:>10} {:>10}", "x", "mean", "aleatoric", "epistemic");
    for (x, p) in probes.iter_rows().zip(model.predict(&probes)?) {
        println!("{:>12?} {:>8.3} {:>10.3} {:>10.3}", x, p.mean(), p.aleatoric(), p.epistemic());
    }
    println!("(noise sd is 0.2 left of x0 = 0 and 1.0 right of it; the last probe is far outside the data)");

    let path = std::env::temp_dir().join("tessera-example-model.json");
    save_checkpoint(&model, &path)?;
    let restored = load_checkpoint(&path)?;
    assert_eq!(restored.params(), model.params());
    println!("checkpoint written to {} and reloaded bit-exactly", path.display());
    Ok(())
}
