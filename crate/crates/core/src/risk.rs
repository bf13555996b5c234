//! Risk functionals: empirical loss-matrix risk, the probit-smoothed sample
//! risk and population risk by Monte Carlo or exact enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::numerics::{log_add_exp, log_normal_cdf};
use crate::rng::{stream_rng, RISK_MC_STREAM};
use crate::types::{Coefficients, Dataset, ModelIndicator, RiskSpec};

/// Linear decision rule A(x) = I[xᵀβ > 0] on an assembled coefficient vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    beta: Vec<f64>,
}

impl DecisionRule {
    pub fn from_model(indicator: &ModelIndicator, coefficients: &Coefficients) -> Result<Self> {
        coefficients.check_shape(indicator)?;
        Ok(Self { beta: coefficients.assemble(indicator) })
    }

    /// Any finite dense vector; used for baselines whose anchor weight is not ±1.
    pub fn from_beta(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::ShapeMismatch("coefficient vector must be finite and nonempty".into()));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn k(&self) -> usize {
        self.beta.len()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { beta: self.beta.iter().map(|b| b * c).collect() }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.beta).map(|(x, b)| x * b).sum()
    }

    pub fn decide(&self, x: &[f64]) -> bool {
        self.margin(x) > 0.0
    }

    fn check(&self, k: usize) -> Result<()> {
        if self.beta.len() != k {
            return Err(Error::ShapeMismatch(format!("rule has {} coefficients, data has K = {k}", self.beta.len())));
        }
        Ok(())
    }
}

/// n⁻¹ Σ ρ(yᵢ, I[mᵢ > 0]) from precomputed margins.
pub fn empirical_risk_from_margins(margins: &[f64], labels: &[u8], spec: &RiskSpec) -> f64 {
    let total: f64 = margins.iter().zip(labels).map(|(&m, &y)| spec.loss(y, m > 0.0)).sum();
    total / labels.len() as f64
}

pub fn empirical_risk_unsmoothed(rule: &DecisionRule, data: &Dataset, spec: &RiskSpec) -> Result<f64> {
    rule.check(data.k())?;
    Ok(empirical_risk_from_margins(&data.margins(rule.beta()), data.labels(), spec))
}

/// Log of one smoothed bracket Φ(m/σ)·a₁ + (1 - Φ(m/σ))·a₀.
pub fn log_smoothed_bracket(margin: f64, y: u8, spec: &RiskSpec) -> f64 {
    let (ln_a0, ln_a1) = spec.log_label_weights(y);
    let t = margin / spec.sigma_n;
    log_add_exp(log_normal_cdf(t) + ln_a1, log_normal_cdf(-t) + ln_a0)
}

/// R_n = -(nψ)⁻¹ Σ ln{Φᵢa₁ + (1 - Φᵢ)a₀} from precomputed margins.
pub fn smoothed_risk_from_margins(margins: &[f64], labels: &[u8], spec: &RiskSpec) -> f64 {
    let total: f64 = margins.iter().zip(labels).map(|(&m, &y)| log_smoothed_bracket(m, y, spec)).sum();
    -total / (labels.len() as f64 * spec.psi)
}

pub fn sample_risk_smoothed(rule: &DecisionRule, data: &Dataset, spec: &RiskSpec) -> Result<f64> {
    rule.check(data.k())?;
    Ok(smoothed_risk_from_margins(&data.margins(rule.beta()), data.labels(), spec))
}

/// The constant c with lim_{σ→0} R_n = empirical risk + c, valid for any
/// rule with no point on its boundary. It depends on the data only through
/// the label mean.
pub fn smoothing_limit_offset(labels: &[u8], spec: &RiskSpec) -> f64 {
    let per_label = |y: u8| -spec.log_label_weights(y).0 / spec.psi - spec.loss(y, false);
    let ones = labels.iter().filter(|&&y| y == 1).count() as f64;
    let ybar = ones / labels.len() as f64;
    ybar * per_label(1) + (1.0 - ybar) * per_label(0)
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub se: f64,
    pub draws: usize,
}

/// Eρ(y, A) over `m` fresh draws from the generator's dedicated stream.
pub fn population_risk_mc(
    rule: &DecisionRule,
    generator: &GeneratorSpec,
    spec: &RiskSpec,
    m: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if m == 0 {
        return Err(Error::InvalidConfig("Monte Carlo sample count must be positive".into()));
    }
    rule.check(generator.k())?;
    let mut rng = stream_rng(seed, RISK_MC_STREAM);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    generator.for_each_draw(m, &mut rng, |x, y| {
        let l = spec.loss(y, rule.decide(x));
        sum += l;
        sum_sq += l * l;
    });
    let mean = sum / m as f64;
    let var = if m > 1 { ((sum_sq - m as f64 * mean * mean) / (m - 1) as f64).max(0.0) } else { 0.0 };
    Ok(RiskEstimate { mean, se: (var / m as f64).sqrt(), draws: m })
}

/// Exact Eρ(y, A) by enumerating a finite-support generator.
pub fn population_risk_analytic(rule: &DecisionRule, generator: &GeneratorSpec, spec: &RiskSpec) -> Result<f64> {
    rule.check(generator.k())?;
    let support = generator.finite_support().ok_or_else(|| {
        Error::InvalidGenerator(format!("{} has no finite support; use the Monte Carlo estimate", generator.name()))
    })?;
    Ok(support
        .iter()
        .map(|pt| {
            let a = rule.decide(&pt.x);
            pt.prob * (pt.p_y1 * spec.loss(1, a) + (1.0 - pt.p_y1) * spec.loss(0, a))
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_misspecified_logistic;
    use crate::numerics::normal_cdf;
    use crate::types::LossMatrix;

    fn cls(psi: f64, sigma: f64) -> RiskSpec {
        RiskSpec::classification(psi, sigma).unwrap()
    }

    #[test]
    fn empirical_risk_counts() {
        let d = Dataset::from_rows(vec![1, 0, 1], &[vec![1.0], vec![1.0], vec![0.5]], "t").unwrap();
        let spec = cls(1.0, 0.1);
        let rule = DecisionRule::from_beta(vec![1.0]).unwrap();
        assert!((empirical_risk_unsmoothed(&rule, &d, &spec).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let perfect = Dataset::from_rows(vec![1, 0], &[vec![1.0], vec![-1.0]], "t").unwrap();
        assert_eq!(empirical_risk_unsmoothed(&rule, &perfect, &spec).unwrap(), 0.0);
        let flipped = rule.scaled(-1.0);
        assert_eq!(empirical_risk_unsmoothed(&flipped, &perfect, &spec).unwrap(), 1.0);
    }

    #[test]
    fn boundary_predicts_zero() {
        let rule = DecisionRule::from_beta(vec![1.0, -1.0]).unwrap();
        assert!(!rule.decide(&[0.5, 0.5]));
    }

    #[test]
    fn smoothed_risk_at_boundary_is_ln2_over_psi() {
        let d = Dataset::from_rows(vec![1], &[vec![0.0]], "t").unwrap();
        for psi in [0.3, 1.0, 4.0] {
            let r = sample_risk_smoothed(&DecisionRule::from_beta(vec![1.0]).unwrap(), &d, &cls(psi, 0.1)).unwrap();
            assert!((r - 2f64.ln() / psi).abs() < 1e-14);
        }
    }

    #[test]
    fn smoothed_risk_far_side_limit() {
        let d = Dataset::from_rows(vec![1], &[vec![1.0]], "t").unwrap();
        let spec = cls(2.0, 1e-3);
        let r = sample_risk_smoothed(&DecisionRule::from_beta(vec![1.0]).unwrap(), &d, &spec).unwrap();
        assert!((r + spec.p1.ln() / spec.psi).abs() < 1e-14);
    }

    #[test]
    fn smoothed_risk_matches_direct_formula() {
        // Five points, fixed β, ψ = 1, σ = 0.1, checked against a literal transcription.
        let rows = [
            vec![0.3, -0.2, 0.9],
            vec![-0.7, 0.4, 0.1],
            vec![0.05, 0.05, -0.6],
            vec![0.8, -0.9, -0.3],
            vec![-0.1, 0.6, 0.2],
        ];
        let labels = vec![1, 0, 0, 1, 1];
        let beta = vec![1.0, 0.4, -0.25];
        let d = Dataset::from_rows(labels.clone(), &rows, "t").unwrap();
        let spec = cls(1.0, 0.1);
        let (p0, p1) = (1.0 / (1.0 + 1f64.exp()), 1f64.exp() / (1.0 + 1f64.exp()));
        let mut want = 0.0;
        for (row, &y) in rows.iter().zip(&labels) {
            let m: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let phi = normal_cdf(m / 0.1);
            let a1 = if y == 1 { p1 } else { 1.0 - p1 };
            let a0 = if y == 1 { p0 } else { 1.0 - p0 };
            want -= f64::ln(phi * a1 + (1.0 - phi) * a0);
        }
        want /= 5.0;
        let got = sample_risk_smoothed(&DecisionRule::from_beta(beta).unwrap(), &d, &spec).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn extreme_margins_stay_finite() {
        let d = Dataset::from_rows(vec![0, 1], &[vec![1.0], vec![-1.0]], "t").unwrap();
        let spec = cls(1.0, 1e-9);
        let r = sample_risk_smoothed(&DecisionRule::from_beta(vec![1.0]).unwrap(), &d, &spec).unwrap();
        assert!(r.is_finite() && r <= spec.term_bound() + 1e-12);
    }

    #[test]
    fn offset_for_classification_loss() {
        // ρ(y, A) + c_y = -ψ⁻¹ ln(bracket at Φ = A); c_y = ψ⁻¹ ln(1 + e^{-ψ}) for both labels.
        let spec = cls(1.5, 0.1);
        let c = smoothing_limit_offset(&[0, 1, 1], &spec);
        assert!((c - (1.0 + (-1.5f64).exp()).ln() / 1.5).abs() < 1e-14);
    }

    #[test]
    fn offset_general_loss() {
        let rho: LossMatrix = [[0.2, 1.0], [3.0, -0.5]];
        let spec = RiskSpec::new(rho, 0.7, 1e-6).unwrap();
        let labels = [1, 0, 0, 1, 1, 0, 1];
        let rows: Vec<Vec<f64>> = [0.3, -0.4, 0.9, -0.2, 0.5, -0.8, -0.6].iter().map(|&x| vec![x]).collect();
        let d = Dataset::from_rows(labels.to_vec(), &rows, "t").unwrap();
        let rule = DecisionRule::from_beta(vec![1.0]).unwrap();
        let lim = sample_risk_smoothed(&rule, &d, &spec).unwrap();
        let emp = empirical_risk_unsmoothed(&rule, &d, &spec).unwrap();
        assert!((lim - emp - smoothing_limit_offset(&labels, &spec)).abs() < 1e-12);
    }

    #[test]
    fn analytic_risks_for_misspecified_logistic() {
        let g = GeneratorSpec::misspecified_logistic(0.125).unwrap();
        let spec = cls(1.0, 0.1);
        let best = DecisionRule::from_beta(vec![1.0, -0.7]).unwrap();
        let zero = DecisionRule::from_beta(vec![0.0, -1.0]).unwrap();
        assert_eq!(population_risk_analytic(&best, &g, &spec).unwrap(), 0.125);
        assert_eq!(population_risk_analytic(&zero, &g, &spec).unwrap(), 0.25);
    }

    #[test]
    fn analytic_risk_indicator_grid_perfect_rule() {
        let g = GeneratorSpec::indicator_grid(9).unwrap();
        let mut beta = vec![0.0; 9];
        beta[0] = 1.0;
        let r = population_risk_analytic(&DecisionRule::from_beta(beta).unwrap(), &g, &cls(1.0, 0.1)).unwrap();
        assert_eq!(r, 0.0);
        let sparse = GeneratorSpec::sparse_linear(vec![1.0, 0.5], 0.1).unwrap();
        assert!(population_risk_analytic(&DecisionRule::from_beta(vec![1.0, 0.0]).unwrap(), &sparse, &cls(1.0, 0.1))
            .is_err());
    }

    #[test]
    fn monte_carlo_matches_analytic_and_complements() {
        let g = GeneratorSpec::misspecified_logistic(0.125).unwrap();
        let spec = cls(1.0, 0.1);
        let rule = DecisionRule::from_beta(vec![1.0, -0.7]).unwrap();
        let est = population_risk_mc(&rule, &g, &spec, 200_000, 4).unwrap();
        assert!((est.mean - 0.125).abs() < 3.0 * est.se);
        let comp = population_risk_mc(&rule.scaled(-1.0), &g, &spec, 200_000, 4).unwrap();
        // -β never ties with β here since every margin is nonzero.
        assert!((est.mean + comp.mean - 1.0).abs() < 1e-12);
        assert_eq!(est, population_risk_mc(&rule, &g, &spec, 200_000, 4).unwrap());
    }

    #[test]
    fn empirical_risk_on_misspecified_sample() {
        let d = gen_misspecified_logistic(0.125, 100_000, 12).unwrap();
        let spec = cls(1.0, 0.1);
        let r = empirical_risk_unsmoothed(&DecisionRule::from_beta(vec![1.0, -0.7]).unwrap(), &d, &spec).unwrap();
        let se = (0.125f64 * 0.875 / 100_000.0).sqrt();
        assert!((r - 0.125).abs() < 3.0 * se);
    }
}
