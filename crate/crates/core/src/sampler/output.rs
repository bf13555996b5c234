use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ChainOutput, SamplerConfig};
use crate::error::Result;

pub const TRACE_COLUMNS: [&str; 5] = ["iteration", "model_size", "R_n_smoothed", "beta1", "accepted_moves"];

/// Posterior summary of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub seed: u64,
    pub retained_draws: usize,
    pub inclusion_frequencies: Vec<f64>,
    /// Mean of the smoothed sample risk over the retained sweeps.
    pub posterior_mean_smoothed_risk: f64,
    pub mean_model_size: f64,
    pub max_model_size: usize,
    pub acceptance_rate: f64,
    pub config: SamplerConfig,
}

impl ChainOutput {
    /// Write the per-sweep trace as CSV. Each line of `preamble` is emitted
    /// first as a `#` comment.
    pub fn write_trace_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        for row in &self.trace {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> ChainSummary {
        let kept: Vec<_> = self.trace.iter().skip(self.config.burn_in).collect();
        let denom = kept.len().max(1) as f64;
        let draws = self.draws.len().max(1) as f64;
        ChainSummary {
            seed: self.config.seed,
            retained_draws: self.draws.len(),
            inclusion_frequencies: self.inclusion_frequencies(),
            posterior_mean_smoothed_risk: kept.iter().map(|r| r.r_n_smoothed).sum::<f64>() / denom,
            mean_model_size: self.draws.iter().map(|d| d.size() as f64).sum::<f64>() / draws,
            max_model_size: self.max_model_size(),
            acceptance_rate: self.acceptance_rate(),
            config: self.config.clone(),
        }
    }
}
