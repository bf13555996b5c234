//! Posterior simulation for the Gibbs posterior ∝ exp(-nψR_n)·π.
//!
//! The default backend is the data-augmentation Gibbs sampler on the
//! smoothed risk: latent Zᵢ ~ N(xᵢᵀβ, σ²) with yᵢ | Zᵢ ~ Bernoulli(p_{I[Zᵢ>0]})
//! turns exp(-nψR_n) into a complete-data likelihood, and each sweep runs
//! Z | β, then β₁ | Z, γ, then γ | Z, β₁ one coordinate at a time, then
//! β̃ | Z, β₁, γ. The alternative backend is a birth/death random-walk
//! Metropolis chain on the unsmoothed empirical risk.

mod gibbs;
mod metropolis;
mod output;

use serde::{Deserialize, Serialize};

use crate::conditions::validate_conditions;
use crate::error::{Error, Result};
use crate::types::{default_delta, Coefficients, Dataset, ModelIndicator, PriorSpec, RiskSpec};

pub use gibbs::{
    augmented_log_joint, run_chain, step1_update_z, step2a_log_weights, step2a_update_sign, step2b_branch_log_weights,
    step2b_update_indicator, step3_update_coefficients, z_positive_weight,
};
pub use metropolis::run_metropolis;
pub use output::{ChainSummary, TRACE_COLUMNS};

/// Order in which Step 2b visits j = 2..K.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScanOrder {
    #[default]
    Systematic,
    RandomPermutation,
}

/// How Step 1 draws each latent coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ZUpdate {
    /// Pick the sign side by its exact posterior weight, then draw a
    /// one-sided truncated normal.
    #[default]
    ExactMixture,
    /// Propose from N(m, σ²) and accept with probability a_side / max(a₀, a₁).
    Rejection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Gibbs,
    Metropolis,
}

/// Step identifiers used to derive per-chain RNG streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Step {
    Init = 0,
    Latent = 1,
    Sign = 2,
    Indicator = 3,
    Coefficients = 4,
    Scan = 5,
    Metropolis = 6,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub scan_order: ScanOrder,
    pub z_update: ZUpdate,
    pub seed: u64,
    pub backend: Backend,
    /// Chain index; selects a disjoint set of RNG streams.
    pub chain: u64,
    /// Standard deviation of the Metropolis coefficient random walk.
    pub mh_step: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burn_in: 500,
            thin: 1,
            scan_order: ScanOrder::Systematic,
            z_update: ZUpdate::ExactMixture,
            seed: 0,
            backend: Backend::Gibbs,
            chain: 0,
            mh_step: 0.5,
        }
    }
}

impl SamplerConfig {
    pub fn new(iterations: usize, burn_in: usize, seed: u64) -> Self {
        Self { iterations, burn_in, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(format!(
                "burn_in = {} must be smaller than iterations = {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if !(self.mh_step > 0.0 && self.mh_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("mh_step must be positive, got {}", self.mh_step)));
        }
        Ok(())
    }

    /// Number of draws kept after burn-in and thinning.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }

    fn keeps(&self, sweep: usize) -> bool {
        sweep > self.burn_in && (sweep - self.burn_in - 1).is_multiple_of(self.thin)
    }

    pub(crate) fn rng(&self, step: Step) -> crate::rng::StreamRng {
        crate::rng::stream_rng(self.seed, crate::rng::chain_stream(self.chain, step as u64))
    }
}

/// Joint state of the augmented chain.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerState {
    pub z: Vec<f64>,
    pub indicator: ModelIndicator,
    pub coefficients: Coefficients,
    pub iteration: usize,
}

impl SamplerState {
    /// Anchor-only model with β₁ = +1 and a zero latent vector (the caller
    /// refreshes Z before use).
    pub fn initial(n: usize, k: usize) -> Self {
        Self {
            z: vec![0.0; n],
            indicator: ModelIndicator::anchor_only(k),
            coefficients: Coefficients::new(1.0, Vec::new()).expect("+1 is a valid anchor sign"),
            iteration: 0,
        }
    }

    pub fn margins(&self, data: &Dataset) -> Vec<f64> {
        data.margins_sparse(self.coefficients.beta1(), self.indicator.active(), &self.coefficients.active)
    }

    pub fn draw(&self) -> Draw {
        Draw {
            beta1: self.coefficients.beta1(),
            active: self.indicator.active().to_vec(),
            values: self.coefficients.active.clone(),
        }
    }
}

/// One retained posterior draw in sparse form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub beta1: f64,
    pub active: Vec<usize>,
    pub values: Vec<f64>,
}

impl Draw {
    /// |γ|₁, anchor included.
    pub fn size(&self) -> usize {
        self.active.len() + 1
    }

    pub fn beta(&self, k: usize) -> Vec<f64> {
        let mut beta = vec![0.0; k];
        beta[crate::types::ANCHOR] = self.beta1;
        for (&j, &b) in self.active.iter().zip(&self.values) {
            beta[j] = b;
        }
        beta
    }

    pub fn rule(&self, k: usize) -> crate::risk::DecisionRule {
        crate::risk::DecisionRule::from_beta(self.beta(k)).expect("draws are finite")
    }

    /// Coefficient of feature j (0 when excluded).
    pub fn coefficient(&self, j: usize) -> f64 {
        if j == crate::types::ANCHOR {
            return self.beta1;
        }
        self.active.binary_search(&j).map_or(0.0, |p| self.values[p])
    }
}

/// One sweep's trace record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub model_size: usize,
    #[serde(rename = "R_n_smoothed")]
    pub r_n_smoothed: f64,
    pub beta1: f64,
    pub accepted_moves: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub draws: Vec<Draw>,
    pub trace: Vec<TraceRow>,
    /// Discrete proposals made (Metropolis) or coordinate updates offered
    /// (Gibbs: one β₁ and K-1 γ updates per sweep).
    pub proposals: u64,
    /// Proposals that changed the state.
    pub accepted: u64,
    pub k: usize,
    pub config: SamplerConfig,
}

impl ChainOutput {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    /// Fraction of retained draws including each feature; the anchor is always 1.
    pub fn inclusion_frequencies(&self) -> Vec<f64> {
        let mut freq = vec![0.0; self.k];
        for d in &self.draws {
            freq[crate::types::ANCHOR] += 1.0;
            for &j in &d.active {
                freq[j] += 1.0;
            }
        }
        let m = self.draws.len().max(1) as f64;
        freq.iter_mut().for_each(|f| *f /= m);
        freq
    }

    pub fn max_model_size(&self) -> usize {
        self.draws.iter().map(Draw::size).max().unwrap_or(1)
    }
}

/// Shared entry checks for both backends.
pub(crate) fn check_inputs(data: &Dataset, risk: &RiskSpec, prior: &PriorSpec, config: &SamplerConfig) -> Result<()> {
    config.validate()?;
    if prior.k != data.k() {
        return Err(Error::ShapeMismatch(format!("prior over K = {} features, data has K = {}", prior.k, data.k())));
    }
    let report = validate_conditions(data, prior, risk, default_delta(data.n()));
    if report.has_hard_failure() {
        let msgs: Vec<String> = report.failures().iter().map(|c| format!("{}: {}", c.name, c.message)).collect();
        return Err(Error::ConditionFailure(msgs.join("; ")));
    }
    Ok(())
}

/// Dispatch on `config.backend`.
pub fn run(data: &Dataset, risk: &RiskSpec, prior: &PriorSpec, config: &SamplerConfig) -> Result<ChainOutput> {
    match config.backend {
        Backend::Gibbs => run_chain(data, risk, prior, config),
        Backend::Metropolis => run_metropolis(data, risk, prior, config),
    }
}
