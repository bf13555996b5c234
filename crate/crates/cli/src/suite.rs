//! Named collections of acceptance criteria.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use crate::criteria::{self, CriterionOutcome};
use crate::error::{CliError, Result};
use crate::experiment::VERSION;

pub const SUITES: [&str; 2] = ["paper-repro", "oracle-checks"];

/// Seed used by the seed-free oracle checks unless overridden.
pub const DEFAULT_SUITE_SEED: u64 = 20;

/// Seeds of the multi-seed experiments.
pub const REPLICATE_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

type Job = Box<dyn Fn(&Path, u64) -> Result<CriterionOutcome> + Send + Sync>;

fn jobs(suite: &str) -> Result<Vec<Job>> {
    let list: Vec<Job> = match suite {
        "paper-repro" => vec![
            Box::new(|out, _| criteria::misspecification_gap(out)),
            Box::new(|out, _| criteria::no_selection_rescue(out)),
            Box::new(|out, _| criteria::risk_performance(out, &REPLICATE_SEEDS)),
            Box::new(|out, _| criteria::monotone_improvement(out, &REPLICATE_SEEDS)),
        ],
        "oracle-checks" => vec![
            Box::new(|_, seed| criteria::augmentation_identity(seed)),
            Box::new(|_, seed| criteria::variational_inequality(seed)),
            Box::new(|_, seed| criteria::step2b_conditional(seed)),
            Box::new(|_, seed| criteria::family_inclusions(seed)),
            Box::new(|out, _| criteria::stationarity(out)),
            Box::new(|out, _| criteria::determinism(out)),
        ],
        other => {
            return Err(CliError::Config(format!("unknown suite '{other}'; available suites: {}", SUITES.join(", "))))
        }
    };
    Ok(list)
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: String,
    pub outcomes: Vec<CriterionOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn table(&self) -> String {
        self.outcomes.iter().map(|o| o.line() + "\n").collect()
    }
}

/// Run every criterion of `suite` in parallel, write `suite_report.json`
/// into `out` and return the outcomes in suite order. Failing criteria are
/// reported, not raised; the caller decides the exit code.
pub fn run_suite(suite: &str, out: &Path, seed: Option<u64>) -> Result<SuiteReport> {
    let jobs = jobs(suite)?;
    fs::create_dir_all(out)?;
    let seed = seed.unwrap_or(DEFAULT_SUITE_SEED);
    let outcomes: Result<Vec<CriterionOutcome>> = jobs.par_iter().map(|job| job(out, seed)).collect();
    let report = SuiteReport { suite: suite.to_string(), outcomes: outcomes? };
    let body = json!({
        "suite": suite,
        "seed": seed,
        "version": VERSION,
        "passed": report.passed(),
        "criteria": report.outcomes,
    });
    let mut text = serde_json::to_string_pretty(&body)?;
    text.push('\n');
    fs::write(out.join("suite_report.json"), text)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_lists_the_available_ones() {
        let dir = std::env::temp_dir().join("gibbs-bvs-unknown-suite");
        let err = run_suite("nope", &dir, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        for s in SUITES {
            assert!(msg.contains(s), "{msg}");
        }
    }
}
