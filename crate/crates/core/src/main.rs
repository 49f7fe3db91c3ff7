use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tessera::experiment::{
    artifact, calibrate_stage, evaluate_stage, gen_data_stage, report_seeds, run_experiment, train_stage,
    EvaluateOptions, ExperimentConfig, ExperimentError, Method,
};

#[derive(Parser)]
#[command(name = "tessera", version, about = "Conformal intervals from mixture-of-experts uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON). Defaults to <out>/config.json when present,
    /// otherwise the built-in default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides training.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Methods to run: tessera_e, tessera_a, classical_cp, moe_e, moe_a,
    /// mc_dropout, or all. Comma-separated or repeated.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default config.
    Config,
    /// Generate or load data and assign splits.
    GenData(Common),
    /// Train the MoE and the dropout baseline.
    Train(Common),
    /// Compute conformal quantiles on the calibration split.
    Calibrate(Common),
    /// Build intervals on the test split and write metrics.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Overrides calibration.alpha; recalibrates if needed.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// All stages in sequence.
    Run {
        #[command(flatten)]
        common: Common,
        /// Overrides calibration.alpha.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Merge evaluated runs into mean ± std tables.
    Report {
        /// Run directories to merge.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Where to write seed_report.{json,csv,md}.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_methods(names: &[String]) -> Result<Option<Vec<Method>>, ExperimentError> {
    if names.is_empty() {
        return Ok(None);
    }
    if names.iter().any(|n| n == "all") {
        return Ok(Some(Method::ALL.to_vec()));
    }
    let mut methods = names
        .iter()
        .map(|n| n.parse::<Method>().map_err(ExperimentError::Config))
        .collect::<Result<Vec<_>, _>>()?;
    methods.sort();
    methods.dedup();
    Ok(Some(methods))
}

fn resolve(common: &Common, alpha: Option<f64>) -> Result<ExperimentConfig, ExperimentError> {
    let fallback = common.out.as_deref().map(|o| o.join(artifact::CONFIG)).filter(|p| p.is_file());
    let mut config = match common.config.as_deref().or(fallback.as_deref()) {
        Some(path) => ExperimentConfig::load(Path::new(path))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.training.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    if let Some(alpha) = alpha {
        config.calibration.alpha = alpha;
    }
    if let Some(methods) = parse_methods(&common.method)? {
        config.methods = methods;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Config => print!("{}", ExperimentConfig::default().to_json()),
        Command::GenData(c) => {
            let ds = gen_data_stage(&resolve(&c, None)?)?;
            println!("wrote {} rows, train/val/cal/test = {:?}", ds.len(), ds.split_sizes());
        }
        Command::Train(c) => {
            train_stage(&resolve(&c, None)?)?;
        }
        Command::Calibrate(c) => {
            for r in calibrate_stage(&resolve(&c, None)?)?.results {
                println!("{}: q_hat = {}", r.kind, r.q_hat);
            }
        }
        Command::Evaluate { common, alpha } => {
            let config = resolve(&common, None)?;
            let options = EvaluateOptions {
                alpha,
                methods: None,
            };
            print_summary(&evaluate_stage(&config, &options)?);
        }
        Command::Run { common, alpha } => print_summary(&run_experiment(&resolve(&common, alpha)?)?),
        Command::Report { runs, out } => {
            let report = report_seeds(&runs, Some(&out))?;
            print!("{}", report.to_markdown());
        }
    }
    Ok(())
}

fn print_summary(summary: &tessera::experiment::RunSummary) {
    println!("{:<14} {:>7} {:>9} {:>9} {:>9}", "method", "PICP", "MPIW", "CWC", "AUSE");
    for (method, e) in &summary.evaluations {
        let r = &e.report;
        println!("{:<14} {:>7.3} {:>9.4} {:>9.4} {:>9.4}", method.as_str(), r.picp, r.mpiw, r.cwc, r.ause);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
