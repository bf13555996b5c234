use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gibbs_bvs_cli::{run_experiment, run_suite, CliError, ExperimentConfig};

/// Gibbs-posterior variable selection experiments.
///
/// Exit codes: 0 success, 2 config error, 3 criterion failure, 4 numeric abort.
#[derive(Debug, Parser)]
#[command(name = "gibbs-bvs", version)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with = "suite", required_unless_present = "suite")]
    config: Option<PathBuf>,
    /// Override the config seed (or the oracle-check seed of a suite).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Named suite: paper-repro or oracle-checks.
    #[arg(long)]
    suite: Option<String>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: &Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads {n}: {e}")))?;
    }
    if let Some(suite) = &args.suite {
        let report = run_suite(suite, &args.out, args.seed)?;
        print!("{}", report.table());
        if !report.passed() {
            let failed: Vec<&str> = report.outcomes.iter().filter(|o| !o.passed).map(|o| o.id.as_str()).collect();
            return Err(CliError::Criterion(failed.join(", ")));
        }
        return Ok(());
    }
    let path = args.config.as_ref().expect("clap requires --config without --suite");
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let report = run_experiment(&cfg, &args.out)?;
    let s = &report.summary;
    println!(
        "{} risk of posterior rules: {:.6} (psi = {}, mean model size {:.2})",
        s.risk_kind, s.gibbs_risk, s.psi, s.mean_model_size
    );
    println!("wrote {}", report.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
