//! Each sampler step checked against an independent evaluation of the
//! same conditional: explicit Gaussian marginals, quadrature over the
//! augmented joint, closed-form scalar posteriors and a two-sample test
//! between the two latent-update mechanisms.

use gibbs_bvs::oracle::quadrature::integrate;
use gibbs_bvs::oracle::stats::{ks_critical_001, ks_statistic};
use gibbs_bvs::prior::{log_prior_coefficients, log_prior_model};
use gibbs_bvs::risk::smoothed_risk_from_margins;
use gibbs_bvs::rng::stream_rng;
use gibbs_bvs::sampler::{
    augmented_log_joint, step1_update_z, step2a_log_weights, step2b_branch_log_weights, step3_update_coefficients,
    SamplerState, ZUpdate,
};
use gibbs_bvs::types::{Coefficients, Dataset, ModelIndicator, PriorSpec, RiskSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn random_data<R: Rng>(n: usize, k: usize, rng: &mut R) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    Dataset::from_rows(labels, &rows, "random").unwrap()
}

fn state(z: Vec<f64>, k: usize, beta1: f64, active: &[usize], values: Vec<f64>) -> SamplerState {
    SamplerState {
        z,
        indicator: ModelIndicator::from_active(k, active).unwrap(),
        coefficients: Coefficients::new(beta1, values).unwrap(),
        iteration: 0,
    }
}

/// a₀(y), a₁(y) from the mixture probabilities.
fn label_weights(risk: &RiskSpec, y: u8) -> (f64, f64) {
    if y == 1 {
        (risk.p0, risk.p1)
    } else {
        (1.0 - risk.p0, 1.0 - risk.p1)
    }
}

/// ln N(z; 0, σ²I + vX̃X̃ᵀ) for the active columns, through nalgebra.
fn log_marginal(data: &Dataset, active: &[usize], z: &[f64], sigma: f64, v: f64) -> f64 {
    let n = data.n();
    let x = DMatrix::from_fn(n, active.len(), |i, a| data.value(i, active[a]));
    let cov = DMatrix::identity(n, n) * sigma * sigma + &x * x.transpose() * v;
    let chol = cov.cholesky().unwrap();
    let zv = DVector::from_column_slice(z);
    let sol = chol.solve(&zv);
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * (n as f64 * LN_2PI + logdet + zv.dot(&sol))
}

fn shifted_z(data: &Dataset, z: &[f64], beta1: f64) -> Vec<f64> {
    z.iter().zip(data.column(0)).map(|(z, x)| z - beta1 * x).collect()
}

#[test]
fn augmented_joint_matches_direct_formula() {
    let mut rng = stream_rng(30, 0);
    for _ in 0..200 {
        let (n, k) = (rng.random_range(1..8), 5);
        let data = random_data(n, k, &mut rng);
        let risk = RiskSpec::classification(rng.random_range(0.1..3.0), rng.random_range(0.05..1.0)).unwrap();
        let prior = PriorSpec::new(0.3, 4, rng.random_range(0.5..3.0), k).unwrap();
        let active = [1usize, 3];
        let values = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let beta1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s = state(z.clone(), k, beta1, &active, values.clone());
        let sigma = risk.sigma_n;
        let mut want = 0.0;
        for (i, &zi) in z.iter().enumerate() {
            let m = beta1 * data.value(i, 0) + values[0] * data.value(i, 1) + values[1] * data.value(i, 3);
            let (a0, a1) = label_weights(&risk, data.label(i));
            want += -0.5 * LN_2PI - sigma.ln() - 0.5 * ((zi - m) / sigma).powi(2);
            want += if zi > 0.0 { a1.ln() } else { a0.ln() };
        }
        // Prior: truncated binomial model mass, fair sign, N(0, v) slab.
        let trunc: f64 = (0..prior.rbar)
            .map(|r| {
                let c = (0..r).fold(1.0, |acc, t| acc * (k - 1 - t) as f64 / (t + 1) as f64);
                c * 0.3f64.powi(r as i32) * 0.7f64.powi((k - 1 - r) as i32)
            })
            .sum();
        want += (0.3f64.powi(2) * 0.7f64.powi(2) / trunc).ln() + 0.5f64.ln();
        for b in &values {
            want += -0.5 * (LN_2PI + prior.v.ln()) - 0.5 * b * b / prior.v;
        }
        let got = augmented_log_joint(&s, &data, &risk, &prior).unwrap();
        assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()), "{got} vs {want}");
    }
}

#[test]
fn augmentation_marginalizes_to_smoothed_likelihood() {
    let mut rng = stream_rng(31, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (n, k) = (rng.random_range(1..=5), 3);
        let data = random_data(n, k, &mut rng);
        let psi = rng.random_range(0.1..5.0);
        let sigma = 10f64.powf(rng.random_range(-2.0..0.3));
        let risk = RiskSpec::classification(psi, sigma).unwrap();
        let prior = PriorSpec::new(0.4, 3, 1.0, k).unwrap();
        let beta1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let values = vec![rng.random_range(-3.0..3.0)];
        let mut s = state(vec![0.0; n], k, beta1, &[2], values);
        let margins = s.margins(&data);
        s.z = margins.clone();
        let base = augmented_log_joint(&s, &data, &risk, &prior).unwrap();
        // The joint is a sum over i, so integrate coordinate by coordinate
        // relative to the value at Zᵢ = mᵢ.
        let mut log_total = base;
        for (i, &m) in margins.iter().enumerate() {
            let f = |t: f64| {
                let mut st = s.clone();
                st.z[i] = t;
                (augmented_log_joint(&st, &data, &risk, &prior).unwrap() - base).exp()
            };
            let (lo, hi) = (m - 40.0 * sigma, m + 40.0 * sigma);
            let integral = if lo < 0.0 && 0.0 < hi {
                integrate(f, lo, 0.0, 1e-300, 1e-13) + integrate(f, 0.0, hi, 1e-300, 1e-13)
            } else {
                integrate(f, lo, hi, 1e-300, 1e-13)
            };
            log_total += integral.ln();
        }
        let log_prior = log_prior_model(&s.indicator, &prior)
            + log_prior_coefficients(&s.coefficients, &s.indicator, &prior).unwrap();
        let want = -(n as f64) * psi * smoothed_risk_from_margins(&margins, data.labels(), &risk) + log_prior;
        let rel = (log_total - want).exp_m1().abs();
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-8, "worst relative error {worst:e}");
}

#[test]
fn latent_mechanisms_agree() {
    for (m, y, psi, sigma, seed) in [(0.3, 1u8, 3f64.ln(), 0.5, 1u64), (-1.0, 0, 2.0, 0.4, 2), (0.05, 0, 0.5, 0.1, 3)] {
        let data = Dataset::from_rows(vec![y], &[vec![m]], "one").unwrap();
        let risk = RiskSpec::classification(psi, sigma).unwrap();
        let draw = |mech: ZUpdate, stream: u64| {
            let mut rng = stream_rng(seed, stream);
            let mut s = state(vec![0.0], 1, 1.0, &[], vec![]);
            (0..100_000)
                .map(|_| {
                    step1_update_z(&mut s, &data, &risk, mech, &mut rng).unwrap();
                    s.z[0]
                })
                .collect::<Vec<f64>>()
        };
        let a = draw(ZUpdate::Rejection, 1);
        let b = draw(ZUpdate::ExactMixture, 2);
        let d = ks_statistic(&a, &b);
        assert!(d < ks_critical_001(a.len(), b.len()), "m={m}: KS {d}");
        // Side frequency against the closed-form weight a₁Φ/(a₁Φ + a₀(1-Φ)).
        let phi = 0.5 * statrs::function::erf::erfc(-m / sigma / std::f64::consts::SQRT_2);
        let (a0, a1) = label_weights(&risk, y);
        let w = a1 * phi / (a1 * phi + a0 * (1.0 - phi));
        let frac = b.iter().filter(|&&z| z > 0.0).count() as f64 / b.len() as f64;
        assert!((frac - w).abs() < 4.0 * (w * (1.0 - w) / b.len() as f64).sqrt());
    }
}

#[test]
fn sign_weights_match_scalar_inverse() {
    let mut rng = stream_rng(32, 0);
    for _ in 0..100 {
        let data = random_data(4, 2, &mut rng);
        let risk = RiskSpec::classification(1.0, rng.random_range(0.1..1.0)).unwrap();
        let prior = PriorSpec::new(0.5, 2, rng.random_range(0.2..4.0), 2).unwrap();
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s = state(z.clone(), 2, 1.0, &[1], vec![0.3]);
        let (lp, lm) = step2a_log_weights(&s, &data, &risk, &prior).unwrap();
        let sigma2 = risk.sigma_n * risk.sigma_n;
        let x: Vec<f64> = data.column(1).to_vec();
        let xx: f64 = x.iter().map(|a| a * a).sum();
        for (beta1, got) in [(1.0, lp), (-1.0, lm)] {
            let zb = shifted_z(&data, &z, beta1);
            let xz: f64 = x.iter().zip(&zb).map(|(a, b)| a * b).sum();
            let zz: f64 = zb.iter().map(|a| a * a).sum();
            let want = 0.5f64.ln() + 0.5 / sigma2 * (xz * xz / (sigma2 / prior.v + xx) - zz);
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }
}

#[test]
fn indicator_weights_match_gaussian_marginals() {
    let mut rng = stream_rng(33, 0);
    let mut checked = 0;
    for _ in 0..300 {
        let (n, k) = (rng.random_range(3..9), 5);
        let data = random_data(n, k, &mut rng);
        let risk = RiskSpec::classification(1.0, rng.random_range(0.1..1.5)).unwrap();
        let lambda = rng.random_range(0.05..0.9);
        let prior = PriorSpec::new(lambda, 4, rng.random_range(0.2..4.0), k).unwrap();
        let beta1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        // Random other-component pattern with at most two members.
        let others: Vec<usize> = (1..k).filter(|_| rng.random::<f64>() < 0.4).take(2).collect();
        let values = vec![0.0; others.len()];
        let s = state(z.clone(), k, beta1, &others, values);
        let zb = shifted_z(&data, &z, beta1);
        let sigma = risk.sigma_n;
        let zz: f64 = zb.iter().map(|a| a * a).sum();
        // Dropped common terms: n/2 ln 2π + n ln σ + ½σ⁻²|Z(β₁)|².
        let common = 0.5 * n as f64 * LN_2PI + n as f64 * sigma.ln() + 0.5 * zz / (sigma * sigma);
        for j in 1..k {
            let (lw0, lw1) = step2b_branch_log_weights(&s, &data, &risk, &prior, j).unwrap();
            let off: Vec<usize> = others.iter().copied().filter(|&a| a != j).collect();
            let mut on = off.clone();
            on.push(j);
            on.sort_unstable();
            let want0 = (1.0 - lambda).ln() + log_marginal(&data, &off, &zb, sigma, prior.v) + common;
            assert!((lw0 - want0).abs() < 1e-8, "off branch {lw0} vs {want0}");
            if on.len() + 1 > prior.rbar {
                assert_eq!(lw1, f64::NEG_INFINITY);
            } else {
                let want1 = lambda.ln() + log_marginal(&data, &on, &zb, sigma, prior.v) + common;
                assert!((lw1 - want1).abs() < 1e-8, "on branch {lw1} vs {want1} (d = {})", on.len());
                checked += 1;
            }
        }
    }
    assert!(checked > 500);
}

/// ln ∫ exp(joint) dβ̃ⱼ over the coefficient of `j` (placed in `active`),
/// by quadrature around the conditional mode.
fn log_integrated_joint(data: &Dataset, risk: &RiskSpec, prior: &PriorSpec, z: &[f64], beta1: f64, j: usize) -> f64 {
    let k = data.k();
    let sigma2 = risk.sigma_n * risk.sigma_n;
    let x = data.column(j);
    let zb = shifted_z(data, z, beta1);
    let prec = x.iter().map(|a| a * a).sum::<f64>() / sigma2 + 1.0 / prior.v;
    let mean = x.iter().zip(&zb).map(|(a, b)| a * b).sum::<f64>() / sigma2 / prec;
    let sd = prec.sqrt().recip();
    let joint = |t: f64| augmented_log_joint(&state(z.to_vec(), k, beta1, &[j], vec![t]), data, risk, prior).unwrap();
    let peak = joint(mean);
    let integral = integrate(|t| (joint(t) - peak).exp(), mean - 40.0 * sd, mean + 40.0 * sd, 1e-300, 1e-13);
    peak + integral.ln()
}

#[test]
fn discrete_steps_balance_against_collapsed_joint() {
    let mut rng = stream_rng(34, 0);
    for _ in 0..40 {
        let (n, k) = (rng.random_range(2..7), 3);
        let data = random_data(n, k, &mut rng);
        let risk = RiskSpec::classification(rng.random_range(0.3..3.0), rng.random_range(0.2..1.0)).unwrap();
        let prior = PriorSpec::new(rng.random_range(0.1..0.9), 2, rng.random_range(0.5..2.0), k).unwrap();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let beta1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let j = 2;
        // Step 2b: P(γⱼ = 1)/P(γⱼ = 0) against the β̃-integrated joint.
        let s = state(z.clone(), k, beta1, &[], vec![]);
        let (lw0, lw1) = step2b_branch_log_weights(&s, &data, &risk, &prior, j).unwrap();
        let on = log_integrated_joint(&data, &risk, &prior, &z, beta1, j);
        let off = augmented_log_joint(&s, &data, &risk, &prior).unwrap();
        assert!(((lw1 - lw0) - (on - off)).abs() < 1e-8, "{} vs {}", lw1 - lw0, on - off);
        // Step 2a with one active coefficient integrated out.
        let s1 = state(z.clone(), k, 1.0, &[j], vec![0.0]);
        let (lp, lm) = step2a_log_weights(&s1, &data, &risk, &prior).unwrap();
        let plus = log_integrated_joint(&data, &risk, &prior, &z, 1.0, j);
        let minus = log_integrated_joint(&data, &risk, &prior, &z, -1.0, j);
        assert!(((lp - lm) - (plus - minus)).abs() < 1e-8);
    }
}

#[test]
fn coefficient_step_matches_scalar_posterior() {
    let mut rng = stream_rng(35, 0);
    let data = random_data(6, 2, &mut rng);
    let risk = RiskSpec::classification(1.0, 0.7).unwrap();
    let prior = PriorSpec::new(0.5, 2, 1.5, 2).unwrap();
    let z: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
    let sigma2 = risk.sigma_n * risk.sigma_n;
    let x = data.column(1);
    let zb = shifted_z(&data, &z, -1.0);
    let s_gamma = sigma2 / prior.v + x.iter().map(|a| a * a).sum::<f64>();
    let mean = x.iter().zip(&zb).map(|(a, b)| a * b).sum::<f64>() / s_gamma;
    let var = sigma2 / s_gamma;
    let mut s = state(z, 2, -1.0, &[1], vec![0.0]);
    let m = 100_000;
    let draws: Vec<f64> = (0..m)
        .map(|_| {
            step3_update_coefficients(&mut s, &data, &risk, &prior, &mut rng).unwrap();
            s.coefficients.active[0]
        })
        .collect();
    let avg = draws.iter().sum::<f64>() / m as f64;
    let sv = draws.iter().map(|d| (d - avg).powi(2)).sum::<f64>() / (m - 1) as f64;
    assert!((avg - mean).abs() < 4.0 * (var / m as f64).sqrt(), "mean {avg} vs {mean}");
    assert!((sv - var).abs() < 4.0 * var * (2.0 / m as f64).sqrt(), "var {sv} vs {var}");
}

#[test]
fn coefficient_conditional_is_proportional_to_joint() {
    // For a Gaussian full conditional, ln p(β̃′|·) - ln p(β̃|·) must equal the
    // joint difference, which is the single-step balance condition.
    let mut rng = stream_rng(36, 0);
    for _ in 0..100 {
        let (n, k) = (rng.random_range(2..8), 4);
        let data = random_data(n, k, &mut rng);
        let risk = RiskSpec::classification(1.0, rng.random_range(0.2..1.0)).unwrap();
        let prior = PriorSpec::new(0.5, 4, rng.random_range(0.5..2.0), k).unwrap();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let active = [1usize, 3];
        let beta1 = 1.0;
        let x = DMatrix::from_fn(n, 2, |i, a| data.value(i, active[a]));
        let zb = DVector::from_vec(shifted_z(&data, &z, beta1));
        let sigma2 = risk.sigma_n * risk.sigma_n;
        let s_mat = DMatrix::identity(2, 2) * (sigma2 / prior.v) + x.transpose() * &x;
        let mean = s_mat.clone().lu().solve(&(x.transpose() * &zb)).unwrap();
        let logp = |b: &DVector<f64>| {
            let d = b - &mean;
            -0.5 * (d.transpose() * &s_mat * &d)[(0, 0)] / sigma2
        };
        let b0 = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        let b1 = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        let j0 =
            augmented_log_joint(&state(z.clone(), k, beta1, &active, b0.as_slice().to_vec()), &data, &risk, &prior)
                .unwrap();
        let j1 =
            augmented_log_joint(&state(z.clone(), k, beta1, &active, b1.as_slice().to_vec()), &data, &risk, &prior)
                .unwrap();
        assert!(((logp(&b1) - logp(&b0)) - (j1 - j0)).abs() < 1e-8);
    }
}
