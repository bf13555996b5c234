use std::collections::BTreeMap;

use gibbs_bvs::linalg::{build_sgamma, spd_solve, SpdFactor};
use gibbs_bvs::oracle::stats::{chi_square_uniform_pvalue, empirical, tv_distance};
use gibbs_bvs::prior::{log_prior_model, model_size_distribution, sample_prior};
use gibbs_bvs::rng::stream_rng;
use gibbs_bvs::types::{Dataset, ModelIndicator, PriorSpec};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{Binomial, Discrete};

fn random_spd<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * rng.random_range(0.01..2.0)
}

#[test]
fn log_det_matches_eigenvalues() {
    let mut rng = stream_rng(20, 0);
    for d in 1..=20 {
        for _ in 0..5 {
            let s = random_spd(d, &mut rng);
            let row_major: Vec<f64> = s.transpose().iter().copied().collect();
            let f = SpdFactor::new(&row_major, d).unwrap();
            let eig: f64 = s.clone().symmetric_eigen().eigenvalues.iter().map(|l| l.ln()).sum();
            assert!((f.log_det() - eig).abs() < 1e-8, "d={d}: {} vs {eig}", f.log_det());
            if d <= 6 {
                assert!((f.log_det() - s.determinant().ln()).abs() < 1e-9);
            }
            let b = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let x = spd_solve(&f, b.as_slice()).unwrap();
            let want = s.clone().lu().solve(&b).unwrap();
            for (a, w) in x.iter().zip(want.iter()) {
                assert!((a - w).abs() < 1e-8 * (1.0 + w.abs()));
            }
            let quad = f.inv_quad(b.as_slice()).unwrap();
            assert!((quad - b.dot(&want)).abs() < 1e-8 * (1.0 + quad.abs()));
        }
    }
}

#[test]
fn sgamma_quadratic_form_ignores_column_order() {
    let mut rng = stream_rng(21, 0);
    for _ in 0..50 {
        let (n, k) = (12, 7);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        perm[1..].shuffle(&mut rng);
        let permuted: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&p| r[p]).collect()).collect();
        let labels = vec![0u8; n];
        let data = Dataset::from_rows(labels.clone(), &rows, "a").unwrap();
        let pdata = Dataset::from_rows(labels, &permuted, "b").unwrap();
        let active = [2usize, 3, 5];
        // Column j of the original sits at position inv[j] after permuting.
        let mut inv = vec![0; k];
        for (pos, &p) in perm.iter().enumerate() {
            inv[p] = pos;
        }
        let pactive: Vec<usize> = active.iter().map(|&j| inv[j]).collect();
        let quad = |d: &Dataset, act: &[usize]| {
            let ind = ModelIndicator::from_active(k, act).unwrap();
            let f = build_sgamma(d, &ind, 0.3, 1.5).unwrap();
            let u: Vec<f64> =
                ind.active().iter().map(|&j| d.column(j).iter().zip(&z).map(|(x, z)| x * z).sum()).collect();
            (f.inv_quad(&u).unwrap(), f.log_det())
        };
        let (q0, l0) = quad(&data, &active);
        let (q1, l1) = quad(&pdata, &pactive);
        assert!((q0 - q1).abs() < 1e-9 * (1.0 + q0.abs()));
        assert!((l0 - l1).abs() < 1e-9);
    }
}

#[test]
fn prior_inclusion_is_exchangeable() {
    let prior = PriorSpec::new(0.15, 5, 1.0, 15).unwrap();
    let mut rng = stream_rng(22, 0);
    let mut counts = vec![0u64; 14];
    let mut positive = 0u64;
    let draws = 100_000;
    for _ in 0..draws {
        let d = sample_prior(&prior, &mut rng).unwrap();
        assert!(d.indicator.size() <= prior.rbar);
        for &j in d.indicator.active() {
            counts[j - 1] += 1;
        }
        positive += u64::from(d.coefficients.beta1() > 0.0);
    }
    let p = chi_square_uniform_pvalue(&counts);
    assert!(p > 0.001, "chi-square p-value {p}, counts {counts:?}");
    let frac = positive as f64 / draws as f64;
    let se = (0.25 / draws as f64).sqrt();
    assert!((frac - 0.5).abs() <= 3.0 * se, "sign fraction {frac}");
}

#[test]
fn prior_sizes_follow_truncated_binomial() {
    for (lambda, rbar, k) in [(0.1, 4, 20), (0.3, 3, 9), (0.05, 10, 60), (0.5, 6, 8)] {
        let prior = PriorSpec::new(lambda, rbar, 1.0, k).unwrap();
        // Independent oracle: statrs binomial pmf renormalized below the cap.
        let binom = Binomial::new(lambda, (k - 1) as u64).unwrap();
        let mass: f64 = (0..rbar as u64).map(|r| binom.pmf(r)).sum();
        let want: BTreeMap<usize, f64> = (0..rbar).map(|r| (r, binom.pmf(r as u64) / mass)).collect();
        let formula = model_size_distribution(&prior);
        for (r, w) in &want {
            assert!((formula[*r] - w).abs() < 1e-12);
        }
        let mut rng = stream_rng(23, k as u64);
        let m = 50_000;
        let sizes: Vec<usize> = (0..m).map(|_| sample_prior(&prior, &mut rng).unwrap().indicator.size() - 1).collect();
        let got = empirical(sizes.iter().copied());
        assert!(tv_distance(&want, &got) < 0.01, "lambda={lambda} rbar={rbar}");
        let mean_want: f64 = want.iter().map(|(r, p)| *r as f64 * p).sum();
        let var: f64 = want.iter().map(|(r, p)| (*r as f64 - mean_want).powi(2) * p).sum();
        let mean_got = sizes.iter().sum::<usize>() as f64 / m as f64;
        assert!((mean_got - mean_want).abs() <= 4.0 * (var / m as f64).sqrt());
    }
}

#[test]
fn model_prior_sums_to_one_by_enumeration() {
    for (lambda, rbar, k) in [(0.2, 4, 12), (0.6, 12, 12), (0.01, 2, 10)] {
        let prior = PriorSpec::new(lambda, rbar, 1.0, k).unwrap();
        let mut total = 0.0;
        for mask in 0u32..1 << (k - 1) {
            let mut bits = vec![true];
            bits.extend((0..k - 1).map(|i| mask >> i & 1 == 1));
            total += log_prior_model(&ModelIndicator::from_bits(bits).unwrap(), &prior).exp();
        }
        assert!((total - 1.0).abs() < 1e-10, "total {total}");
    }
}
