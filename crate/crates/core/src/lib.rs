//! Gibbs-posterior Bayesian variable selection for linear classification
//! and cost-sensitive decision rules.
//!
//! A decision rule A(x) = I[xᵀβ > 0] is scored by a sample risk R_n, and β
//! is drawn from the quasi-posterior ∝ exp(-nψR_n)·π(β) under a
//! size-restricted spike-and-slab prior. The anchor coefficient β₁ is fixed
//! to ±1 to remove the scale redundancy of the rule.

pub mod conditions;
pub mod error;
pub mod families;
pub mod generators;
pub mod linalg;
pub mod numerics;
pub mod oracle;
pub mod prior;
pub mod risk;
pub mod rng;
pub mod sampler;
pub mod types;

pub use conditions::{validate_conditions, ConditionReport, Status};
pub use error::{Error, Result};
pub use generators::GeneratorSpec;
pub use risk::DecisionRule;
pub use types::{Coefficients, Dataset, LossMatrix, ModelIndicator, PriorSpec, RiskSpec, ANCHOR};
