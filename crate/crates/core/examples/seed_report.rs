//! Repeat a small run over several seeds and merge the reports into
//! mean ± std tables.

use tessera::experiment::{report_seeds, run_experiment, ExperimentConfig, Method};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join("tessera-example-seeds");
    let mut dirs = Vec::new();
    for seed in [0, 11, 42] {
        let mut cfg = ExperimentConfig::default();
        cfg.training.seed = seed;
        cfg.training.epochs = 20;
        cfg.training.learning_rate = 3e-3;
        cfg.methods = vec![Method::TesseraE, Method::TesseraA, Method::ClassicalCp];
        cfg.output_dir = root.join(format!("seed{seed}"));
        run_experiment(&cfg)?;
        dirs.push(cfg.output_dir);
    }
    let report = report_seeds(&dirs, Some(&root))?;
    for method in [Method::TesseraE, Method::TesseraA, Method::ClassicalCp] {
        let p = report.get(method, "picp").unwrap();
        let w = report.get(method, "mpiw").unwrap();
        println!("{method:<14} PICP {:.3} ± {:.3}   MPIW {:.3} ± {:.3}", p.mean, p.std, w.mean, w.std);
    }
    println!("full tables in {}", root.join("seed_report.md").display());
    Ok(())
}
