//! The size-restricted normal-binary prior: γ₁ = 1, γ₂..γ_K i.i.d.
//! Bernoulli(λ) conditioned on |γ|₁ ≤ r̄, β₁ = ±1 with equal probability and
//! β̃_γ ~ N(0, vI).

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{ln_choose, log_sum_exp, xlogy, LN_2PI, MAX_REJECTIONS};
use crate::types::{Coefficients, ModelIndicator, PriorSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct PriorDraw {
    pub indicator: ModelIndicator,
    pub coefficients: Coefficients,
}

/// ln P(|γ|₁ - 1 = r) before truncation, for r = 0..K-1.
fn log_size_pmf(prior: &PriorSpec, r: usize) -> f64 {
    let m = (prior.k - 1) as u64;
    ln_choose(m, r as u64) + xlogy(r as f64, prior.lambda) + xlogy((m - r as u64) as f64, 1.0 - prior.lambda)
}

/// ln Z_trunc = ln P(Binomial(K-1, λ) ≤ r̄ - 1).
pub fn log_truncation_mass(prior: &PriorSpec) -> f64 {
    let top = (prior.rbar - 1).min(prior.k - 1);
    let terms: Vec<f64> = (0..=top).map(|r| log_size_pmf(prior, r)).collect();
    log_sum_exp(&terms)
}

/// P(|γ|₁ - 1 = r) under the truncated prior, r = 0..=r̄-1.
pub fn model_size_distribution(prior: &PriorSpec) -> Vec<f64> {
    let top = (prior.rbar - 1).min(prior.k - 1);
    let z = log_truncation_mass(prior);
    (0..=top).map(|r| (log_size_pmf(prior, r) - z).exp()).collect()
}

pub fn sample_prior<R: Rng + ?Sized>(prior: &PriorSpec, rng: &mut R) -> Result<PriorDraw> {
    let k = prior.k;
    // The count of i.i.d. Bernoulli(λ) successes among the K - 1 free bits is
    // Binomial(K - 1, λ) and, given the count, the positions are a uniform
    // subset; rejecting oversize counts is the same rejection as on bits.
    let binom = Binomial::new((k - 1) as u64, prior.lambda)
        .map_err(|e| Error::InvalidPrior(format!("binomial({}, {}): {e}", k - 1, prior.lambda)))?;
    let mut extra = None;
    for _ in 0..MAX_REJECTIONS {
        let r = binom.sample(rng) as usize;
        if r < prior.rbar {
            extra = Some(r);
            break;
        }
    }
    let r = extra.ok_or_else(|| {
        Error::NumericAbort(format!(
            "{MAX_REJECTIONS} consecutive prior draws exceeded the size cap {} (lambda K = {})",
            prior.rbar,
            prior.lambda * k as f64
        ))
    })?;
    let active: Vec<usize> = sample_indices(rng, k - 1, r).into_iter().map(|i| i + 1).collect();
    let indicator = ModelIndicator::from_active(k, &active)?;
    let beta1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let sd = prior.v.sqrt();
    let values = (0..indicator.active().len()).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(PriorDraw { indicator, coefficients: Coefficients::new(beta1, values)? })
}

/// ln π(γ), -∞ above the size cap.
pub fn log_prior_model(indicator: &ModelIndicator, prior: &PriorSpec) -> f64 {
    let size = indicator.size();
    if size > prior.rbar || indicator.k() != prior.k {
        return f64::NEG_INFINITY;
    }
    let r = (size - 1) as f64;
    xlogy(r, prior.lambda) + xlogy((prior.k - size) as f64, 1.0 - prior.lambda) - log_truncation_mass(prior)
}

/// ln 0.5 for the sign plus the N(0, vI) log density of the active block.
pub fn log_prior_coefficients(
    coefficients: &Coefficients,
    indicator: &ModelIndicator,
    prior: &PriorSpec,
) -> Result<f64> {
    coefficients.check_shape(indicator)?;
    let d = coefficients.active.len() as f64;
    let ss: f64 = coefficients.active.iter().map(|b| b * b).sum();
    Ok(0.5f64.ln() - 0.5 * d * (LN_2PI + prior.v.ln()) - 0.5 * ss / prior.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn degenerate_selection_probabilities() {
        let mut rng = stream_rng(1, 5);
        let p = PriorSpec::new(0.0, 3, 1.0, 10).unwrap();
        for _ in 0..100 {
            let d = sample_prior(&p, &mut rng).unwrap();
            assert_eq!(d.indicator.size(), 1);
            assert!(d.coefficients.active.is_empty());
        }
        let p = PriorSpec::new(1.0, 10, 1.0, 10).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_prior(&p, &mut rng).unwrap().indicator.size(), 10);
        }
    }

    #[test]
    fn pathological_cap_aborts() {
        let p = PriorSpec::new(1.0, 2, 1.0, 10).unwrap();
        assert!(matches!(sample_prior(&p, &mut stream_rng(0, 5)), Err(Error::NumericAbort(_))));
    }

    #[test]
    fn truncated_mass_spot_value() {
        let p = PriorSpec::new(0.3, 2, 1.0, 5).unwrap();
        let z = 0.7f64.powi(4) + 4.0 * 0.3 * 0.7f64.powi(3);
        assert!((log_truncation_mass(&p) - z.ln()).abs() < 1e-13);
        let ind = ModelIndicator::from_active(5, &[3]).unwrap();
        let want = 0.3f64.ln() + 3.0 * 0.7f64.ln() - z.ln();
        assert!((log_prior_model(&ind, &p) - want).abs() < 1e-13);
        let over = ModelIndicator::from_active(5, &[1, 3]).unwrap();
        assert_eq!(log_prior_model(&over, &p), f64::NEG_INFINITY);
    }

    #[test]
    fn untruncated_reduces_to_bernoulli_pattern() {
        let p = PriorSpec::new(0.2, 6, 1.0, 6).unwrap();
        let ind = ModelIndicator::from_active(6, &[2, 5]).unwrap();
        let want = 2.0 * 0.2f64.ln() + 3.0 * 0.8f64.ln();
        assert!((log_prior_model(&ind, &p) - want).abs() < 1e-13);
    }

    #[test]
    fn enumerated_models_sum_to_one() {
        for (k, lambda, rbar) in [(12, 0.3, 4), (8, 0.9, 8), (5, 0.05, 1), (10, 0.5, 6)] {
            let p = PriorSpec::new(lambda, rbar, 1.0, k).unwrap();
            let total: f64 = (0u32..1 << (k - 1))
                .map(|mask| {
                    let bits: Vec<bool> = std::iter::once(true).chain((0..k - 1).map(|i| mask >> i & 1 == 1)).collect();
                    log_prior_model(&ModelIndicator::from_bits(bits).unwrap(), &p).exp()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-10, "K={k}: {total}");
        }
    }

    #[test]
    fn coefficient_density() {
        let p = PriorSpec::new(0.5, 3, 1.0, 3).unwrap();
        let ind0 = ModelIndicator::anchor_only(3);
        let c0 = Coefficients::new(1.0, vec![]).unwrap();
        assert!((log_prior_coefficients(&c0, &ind0, &p).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        let ind1 = ModelIndicator::from_active(3, &[1]).unwrap();
        let c1 = Coefficients::new(-1.0, vec![0.0]).unwrap();
        assert!((log_prior_coefficients(&c1, &ind1, &p).unwrap() - (0.5f64.ln() - 0.5 * LN_2PI)).abs() < 1e-15);
        let p2 = PriorSpec::new(0.5, 3, 2.0, 3).unwrap();
        let ind2 = ModelIndicator::from_active(3, &[1, 2]).unwrap();
        let c2 = Coefficients::new(1.0, vec![1.0, 2.0]).unwrap();
        let normal = |x: f64| -0.5 * (2.0 * std::f64::consts::PI * 2.0).ln() - x * x / 4.0;
        let want = 0.5f64.ln() + normal(1.0) + normal(2.0);
        assert!((log_prior_coefficients(&c2, &ind2, &p2).unwrap() - want).abs() < 1e-13);
        assert!(log_prior_coefficients(&c1, &ind2, &p2).is_err());
    }
}
