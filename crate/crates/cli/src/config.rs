//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 1
//!
//! [generator]                  # or [input] with path / label_column / anchor
//! kind = "sparse-linear"       # misspecified-logistic | indicator-grid | sparse-linear
//! n = 200
//! k = 200
//! support = 3
//! coef_scale = 1.0
//! noise = 0.1
//!
//! [risk]
//! rho = [[0.0, 1.0], [1.0, 0.0]]
//! psi = 1.0
//! psi_grid = [0.25, 0.5, 1.0, 2.0, 4.0]   # optional; selects psi on validation data
//! sigma = "auto"                          # sqrt(ln n / n), or a number
//!
//! [prior]
//! lambda = "auto"
//! rbar = "auto"
//! v = 1.0
//!
//! [sampler]
//! iterations = 2000
//! burn_in = 500
//!
//! [evaluation]
//! holdout = 20000
//! baseline = true
//! best_sparse = { budget = 3, pool = "truth" }
//! ```
//!
//! Every section except the data source is optional. Unknown keys are
//! rejected so typos surface as config errors.

use std::path::{Path, PathBuf};

use gibbs_bvs::sampler::{Backend, SamplerConfig, ScanOrder, ZUpdate};
use gibbs_bvs::types::{LossMatrix, CLASSIFICATION_LOSS};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// The literal `"auto"`. The smoothing scale also accepts the rule written out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    #[serde(alias = "sqrt(ln n / n)")]
    Auto,
}

/// Either a fixed value or the documented automatic rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Value(T),
    Keyword(Auto),
}

impl<T> Default for AutoOr<T> {
    fn default() -> Self {
        AutoOr::Keyword(Auto::Auto)
    }
}

impl<T: Copy> AutoOr<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            AutoOr::Value(v) => Some(*v),
            AutoOr::Keyword(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorConfig {
    MisspecifiedLogistic {
        lambda: f64,
        n: usize,
    },
    IndicatorGrid {
        k: usize,
        n: usize,
    },
    SparseLinear {
        k: usize,
        n: usize,
        support: usize,
        #[serde(default = "one")]
        coef_scale: f64,
        #[serde(default)]
        noise: f64,
    },
}

impl GeneratorConfig {
    pub fn n(&self) -> usize {
        match self {
            GeneratorConfig::MisspecifiedLogistic { n, .. }
            | GeneratorConfig::IndicatorGrid { n, .. }
            | GeneratorConfig::SparseLinear { n, .. } => *n,
        }
    }

    pub fn with_n(&self, new_n: usize) -> Self {
        let mut g = self.clone();
        match &mut g {
            GeneratorConfig::MisspecifiedLogistic { n, .. }
            | GeneratorConfig::IndicatorGrid { n, .. }
            | GeneratorConfig::SparseLinear { n, .. } => *n = new_n,
        }
        g
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    pub label_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    pub rho: LossMatrix,
    pub psi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_grid: Option<Vec<f64>>,
    pub sigma: AutoOr<f64>,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self { rho: CLASSIFICATION_LOSS, psi: 1.0, psi_grid: None, sigma: AutoOr::default() }
    }
}

/// Prior hyperparameters. With both `lambda` and `rbar` on auto,
/// r̄ = max(1, ⌊M·v_n⌋) and λ = r̄/(2K), v_n = nδ²/(ln n)². Fixing one of
/// them keeps the other rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub lambda: AutoOr<f64>,
    pub rbar: AutoOr<usize>,
    pub v: f64,
    /// Multiplier M of the automatic size cap.
    pub m: f64,
    /// δ_n; auto is (ln n)²/√n.
    pub delta: AutoOr<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { lambda: AutoOr::default(), rbar: AutoOr::default(), v: 1.0, m: 2.0, delta: AutoOr::default() }
    }
}

/// Sampler settings; the seed comes from the top level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub scan_order: ScanOrder,
    pub z_update: ZUpdate,
    pub backend: Backend,
    pub mh_step: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            iterations: d.iterations,
            burn_in: d.burn_in,
            thin: d.thin,
            scan_order: d.scan_order,
            z_update: d.z_update,
            backend: d.backend,
            mh_step: d.mh_step,
        }
    }
}

impl SamplerSection {
    pub fn to_sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            scan_order: self.scan_order,
            z_update: self.z_update,
            seed,
            backend: self.backend,
            chain: 0,
            mh_step: self.mh_step,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolName {
    /// Every non-anchor feature.
    All,
    /// The generator's true support (sparse-linear only).
    Truth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoolConfig {
    Named(PoolName),
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestSparseConfig {
    pub budget: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_pool")]
    pub pool: PoolConfig,
}

fn default_half_width() -> f64 {
    3.0
}

fn default_points() -> usize {
    25
}

fn default_pool() -> PoolConfig {
    PoolConfig::Named(PoolName::All)
}

/// Exact grid posterior comparison for toy problems (K ≤ 4, r̄ ≤ 3).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOracleConfig {
    pub half_width: f64,
    pub points: usize,
    pub subcells: usize,
}

impl Default for GridOracleConfig {
    fn default() -> Self {
        Self { half_width: 3.0, points: 21, subcells: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Exact population risk; defaults to on for finite-support generators.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<bool>,
    /// Fresh holdout draws. Defaults to 20000 when no analytic risk is available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<usize>,
    /// Share of input rows held out (input data only).
    pub holdout_fraction: f64,
    /// Fresh validation draws for temperature selection.
    pub validation: usize,
    /// Share of training rows used for temperature selection (input data only).
    pub validation_fraction: f64,
    /// Retained draws scored per risk estimate, evenly spaced; all when unset
    /// for analytic risk, 500 for holdout risk.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_draws: Option<usize>,
    /// Fit the logistic maximum-likelihood classifier for comparison.
    pub baseline: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_sparse: Option<BestSparseConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_oracle: Option<GridOracleConfig>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            analytic: None,
            holdout: None,
            holdout_fraction: 0.25,
            validation: 2000,
            validation_fraction: 0.2,
            eval_draws: None,
            baseline: false,
            best_sparse: None,
            grid_oracle: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputConfig>,
    #[serde(default)]
    pub risk: RiskConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Relative data paths are relative to the config file.
        if let (Some(input), Some(dir)) = (cfg.input.as_mut(), path.parent()) {
            if input.path.is_relative() {
                input.path = dir.join(&input.path);
            }
        }
        Ok(cfg)
    }

    /// Structural checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        match (&self.generator, &self.input) {
            (Some(_), Some(_)) => return bad("give either [generator] or [input], not both".into()),
            (None, None) => return bad("missing data source: add a [generator] or [input] section".into()),
            _ => {}
        }
        if self.input.is_some() && self.evaluation.analytic == Some(true) {
            return bad("analytic risk needs a generator with finite support".into());
        }
        if let Some(grid) = &self.risk.psi_grid {
            if grid.is_empty() || grid.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
                return bad(format!("psi_grid must be a nonempty list of positive numbers, got {grid:?}"));
            }
            if self.generator.is_some() && self.evaluation.validation == 0 {
                return bad("psi_grid needs evaluation.validation > 0".into());
            }
        }
        for (name, f) in [
            ("holdout_fraction", self.evaluation.holdout_fraction),
            ("validation_fraction", self.evaluation.validation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("evaluation.{name} must lie in (0, 1), got {f}"));
            }
        }
        if let AutoOr::Value(s) = self.risk.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("risk.sigma must be positive, got {s}"));
            }
        }
        if !(self.prior.m > 0.0 && self.prior.m.is_finite()) {
            return bad(format!("prior.m must be positive, got {}", self.prior.m));
        }
        if self.evaluation.eval_draws == Some(0) {
            return bad("evaluation.eval_draws must be positive".into());
        }
        if let Some(b) = &self.evaluation.best_sparse {
            if b.points < 2 {
                return bad("best_sparse.points must be at least 2".into());
            }
            if matches!(b.pool, PoolConfig::Named(PoolName::Truth))
                && !matches!(self.generator, Some(GeneratorConfig::SparseLinear { .. }))
            {
                return bad("best_sparse.pool = \"truth\" needs a sparse-linear generator".into());
            }
        }
        self.sampler.to_sampler(self.seed).validate()?;
        Ok(())
    }

    /// Canonical JSON used for the config hash and the echo file.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPARSE: &str = r#"
        seed = 7
        [generator]
        kind = "sparse-linear"
        k = 20
        n = 50
        support = 2
        [risk]
        sigma = 0.3
        psi_grid = [1.0, 2.0]
        [prior]
        lambda = 0.05
        [evaluation]
        best_sparse = { budget = 2, pool = "truth" }
    "#;

    #[test]
    fn parses_documented_schema() {
        let cfg = ExperimentConfig::from_toml_str(SPARSE).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.risk.sigma, AutoOr::Value(0.3));
        assert_eq!(cfg.prior.rbar, AutoOr::Keyword(Auto::Auto));
        assert_eq!(cfg.prior.lambda.value(), Some(0.05));
        assert_eq!(cfg.evaluation.best_sparse.as_ref().unwrap().points, 25);
        assert!(matches!(cfg.generator, Some(GeneratorConfig::SparseLinear { noise, .. }) if noise == 0.0));
    }

    #[test]
    fn sigma_rule_spelled_out() {
        let cfg = ExperimentConfig::from_toml_str(
            "[generator]\nkind = \"indicator-grid\"\nk = 10\nn = 5\n[risk]\nsigma = \"sqrt(ln n / n)\"\n",
        )
        .unwrap();
        assert_eq!(cfg.risk.sigma, AutoOr::Keyword(Auto::Auto));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SPARSE).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&cfg.canonical_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "",
            "[generator]\nkind = \"nope\"\nn = 3\n",
            "[generator]\nkind = \"indicator-grid\"\nk = 10\nn = 5\ntypo = 1\n",
            "[generator]\nkind = \"indicator-grid\"\nk = 10\nn = 5\n[risk]\npsi_grid = []\n",
            "[generator]\nkind = \"indicator-grid\"\nk = 10\nn = 5\n[sampler]\niterations = 10\nburn_in = 10\n",
            "[generator]\nkind = \"indicator-grid\"\nk = 10\nn = 5\n[evaluation]\nbest_sparse = { budget = 1, pool = \"truth\" }\n",
            "[input]\npath = \"x.csv\"\nlabel_column = \"y\"\n[evaluation]\nanalytic = true\n",
        ] {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text:?} gave {err}");
        }
    }
}
