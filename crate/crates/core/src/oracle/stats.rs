//! Goodness-of-fit helpers for the stochastic tests.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sample Kolmogorov–Smirnov statistic sup|F_a - F_b|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic KS critical value at level α = 0.001: c(α)·√((n+m)/(nm)) with
/// c(α) = √(-ln(α/2)/2).
pub fn ks_critical_001(n: usize, m: usize) -> f64 {
    let c = (-(0.0005f64).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Pearson chi-square p-value for counts against equal expected frequencies.
pub fn chi_square_uniform_pvalue(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("at least two cells");
    1.0 - dist.cdf(stat)
}

/// ½ Σ |p - q| over the union of keys.
pub fn tv_distance<K: Ord + Clone>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut total = 0.0;
    for (k, &a) in p {
        total += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &b) in q {
        if !p.contains_key(k) {
            total += b.abs();
        }
    }
    0.5 * total
}

/// Empirical distribution of hashable outcomes.
pub fn empirical<K: Ord>(items: impl IntoIterator<Item = K>) -> BTreeMap<K, f64> {
    let mut counts = BTreeMap::new();
    let mut n = 0usize;
    for k in items {
        *counts.entry(k).or_insert(0.0) += 1.0;
        n += 1;
    }
    counts.values_mut().for_each(|c| *c /= n.max(1) as f64);
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert_eq!(ks_statistic(&a, &[1.0, 2.0]), 1.0);
        assert!((ks_critical_001(100, 100) - 1.9495 * 0.02f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn chi_square_and_tv() {
        assert!(chi_square_uniform_pvalue(&[100, 100, 100]) > 0.99);
        assert!(chi_square_uniform_pvalue(&[10, 100, 190]) < 1e-6);
        let p = empirical(["a", "a", "b", "c"]);
        let q = empirical(["a", "b"]);
        assert!((tv_distance(&p, &q) - 0.25).abs() < 1e-15);
    }
}
