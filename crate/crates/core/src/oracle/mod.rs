//! Independent brute-force references for the sampler and the risk
//! functionals, capped at toy sizes.

pub mod baseline;
pub mod grid;
pub mod no_selection;
pub mod quadrature;
pub mod search;
pub mod stats;

pub use baseline::{logistic_mle_baseline, LogisticFit};
pub use grid::{exact_grid_posterior, variational_check, GridPosterior, GridRisk, GridSpec, VariationalReport};
pub use no_selection::{no_selection_experiment, NoSelectionResult};
pub use search::{best_sparse_rule, Objective, SparseRuleResult, SparseSearch};
