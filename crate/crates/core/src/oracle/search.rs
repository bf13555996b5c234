//! Brute-force search for the best sparse linear rule.

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::numerics::ln_choose;
use crate::risk::{empirical_risk_from_margins, population_risk_analytic, DecisionRule};
use crate::types::{Dataset, RiskSpec, ANCHOR};

/// Largest number of candidate rules the search will evaluate.
pub const SEARCH_LIMIT: f64 = 1.0e7;

/// What the search minimizes.
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    Empirical(&'a Dataset),
    Analytic(&'a GeneratorSpec),
}

impl Objective<'_> {
    fn k(&self) -> usize {
        match self {
            Objective::Empirical(d) => d.k(),
            Objective::Analytic(g) => g.k(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SparseSearch {
    /// Maximum number of non-anchor coefficients.
    pub budget: usize,
    /// Nonzero values tried for each selected coefficient.
    pub values: Vec<f64>,
    /// Features eligible for selection; all non-anchor features when `None`.
    pub pool: Option<Vec<usize>>,
}

impl SparseSearch {
    /// `points` equally spaced nonzero values in [-half_width, half_width].
    pub fn grid(budget: usize, half_width: f64, points: usize) -> Self {
        let values = (0..points)
            .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1).max(1) as f64)
            .filter(|v| v.abs() > 1e-12)
            .collect();
        Self { budget, values, pool: None }
    }

    pub fn with_pool(mut self, pool: Vec<usize>) -> Self {
        self.pool = Some(pool);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseRuleResult {
    pub rule: DecisionRule,
    pub risk: f64,
    pub evaluated: u64,
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let r = c.len();
    for i in (0..r).rev() {
        if c[i] < n - r + i {
            c[i] += 1;
            for j in i + 1..r {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Enumerate β₁ ∈ {±1}, supports of size ≤ budget from the pool and grid
/// values on each support; return the minimizer (first found on ties).
pub fn best_sparse_rule(objective: Objective<'_>, spec: &RiskSpec, search: &SparseSearch) -> Result<SparseRuleResult> {
    let k = objective.k();
    let pool: Vec<usize> = match &search.pool {
        Some(p) => {
            if p.iter().any(|&j| j == ANCHOR || j >= k) {
                return Err(Error::ShapeMismatch("search pool must hold non-anchor feature indices".into()));
            }
            p.clone()
        }
        None => (1..k).collect(),
    };
    let g = search.values.len() as f64;
    let max_r = search.budget.min(pool.len());
    let count: f64 =
        (0..=max_r).map(|r| 2.0 * (ln_choose(pool.len() as u64, r as u64) + r as f64 * g.ln()).exp()).sum();
    if count > SEARCH_LIMIT {
        return Err(Error::Guard(format!(
            "sparse search would evaluate {count:.3e} rules (limit {SEARCH_LIMIT:.0e}); shrink the pool, budget or grid"
        )));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evaluated = 0u64;
    let mut consider = |beta: &[f64], risk: f64| {
        evaluated += 1;
        if best.as_ref().is_none_or(|(r, _)| risk < *r) {
            best = Some((risk, beta.to_vec()));
        }
    };
    let anchor_col: Option<Vec<f64>> = match objective {
        Objective::Empirical(d) => Some(d.column(ANCHOR).to_vec()),
        Objective::Analytic(_) => None,
    };

    for r in 0..=max_r {
        let mut comb: Vec<usize> = (0..r).collect();
        loop {
            let support: Vec<usize> = comb.iter().map(|&i| pool[i]).collect();
            for beta1 in [1.0, -1.0] {
                let mut digits = vec![0usize; r];
                loop {
                    let mut beta = vec![0.0; k];
                    beta[ANCHOR] = beta1;
                    for (&j, &dg) in support.iter().zip(&digits) {
                        beta[j] = search.values[dg];
                    }
                    let risk = match objective {
                        Objective::Empirical(d) => {
                            let mut m: Vec<f64> =
                                anchor_col.as_ref().expect("empirical").iter().map(|x| beta1 * x).collect();
                            for &j in &support {
                                for (mi, x) in m.iter_mut().zip(d.column(j)) {
                                    *mi += beta[j] * x;
                                }
                            }
                            empirical_risk_from_margins(&m, d.labels(), spec)
                        }
                        Objective::Analytic(gen) => {
                            population_risk_analytic(&DecisionRule::from_beta(beta.clone())?, gen, spec)?
                        }
                    };
                    consider(&beta, risk);
                    // Odometer over the value grid.
                    let mut pos = 0;
                    while pos < r {
                        digits[pos] += 1;
                        if digits[pos] < search.values.len() {
                            break;
                        }
                        digits[pos] = 0;
                        pos += 1;
                    }
                    if pos == r {
                        break;
                    }
                }
            }
            if r == 0 || !next_combination(&mut comb, pool.len()) {
                break;
            }
        }
    }
    let (risk, beta) = best.expect("at least the anchor-only rules are evaluated");
    Ok(SparseRuleResult { rule: DecisionRule::from_beta(beta)?, risk, evaluated })
}
