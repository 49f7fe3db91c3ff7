//! One complete run from a JSON config: data, MoE and dropout training,
//! calibration, evaluation, and all report files.

use tessera::experiment::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("tessera-example-run");
    let config = ExperimentConfig::from_json(&format!(
        r#"{{
            "version": 1,
            "output_dir": {out:?},
            "data": {{"generate": {{"generator": "heteroscedastic", "n": 3000, "d": 4,
                                   "noise": {{"kind": "linear", "base": 0.1, "slope": 0.9}}, "seed": 0}}}},
            "training": {{"epochs": 30, "learning_rate": 0.003}},
            "dropout": {{"epochs": 20, "passes": 30}}
        }}"#
    ))?;
    let summary = run_experiment(&config)?;
    println!("{:<14} {:>6} {:>8} {:>10} {:>8}", "method", "PICP", "NMPIW", "CWC", "AUSE");
    for (method, eval) in &summary.evaluations {
        let r = &eval.report;
        println!("{:<14} {:>6.3} {:>8.4} {:>10.3e} {:>8.4}", method.as_str(), r.picp, r.nmpiw, r.cwc, r.ause);
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
