//! Logistic regression by iteratively reweighted least squares.

use crate::error::Result;
use crate::linalg::{spd_solve, SpdFactor};
use crate::risk::DecisionRule;
use crate::types::Dataset;

pub const MLE_RIDGE: f64 = 1e-8;
pub const MLE_MAX_ITER: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticFit {
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticFit {
    /// Fitted P(y = 1 | x).
    pub fn prob(&self, x: &[f64]) -> f64 {
        let eta: f64 = x.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        1.0 / (1.0 + (-eta).exp())
    }

    /// The plug-in classifier I[p̂ > 0.5] = I[xᵀβ̂ > 0].
    pub fn classifier(&self) -> DecisionRule {
        DecisionRule::from_beta(self.beta.clone()).expect("fit is finite")
    }
}

/// Newton–Raphson on the ridge-penalized log likelihood. Nonconvergence
/// within the iteration cap is reported in the result, not as an error.
pub fn logistic_mle_baseline(data: &Dataset) -> Result<LogisticFit> {
    let (n, k) = (data.n(), data.k());
    let mut beta = vec![0.0; k];
    for it in 1..=MLE_MAX_ITER {
        let eta = data.margins(&beta);
        let p: Vec<f64> = eta.iter().map(|e| 1.0 / (1.0 + (-e).exp())).collect();
        let w: Vec<f64> = p.iter().map(|p| (p * (1.0 - p)).max(1e-12)).collect();
        let mut hess = vec![0.0; k * k];
        let mut grad = vec![0.0; k];
        for a in 0..k {
            let ca = data.column(a);
            grad[a] = (0..n).map(|i| ca[i] * (data.label(i) as f64 - p[i])).sum::<f64>() - MLE_RIDGE * beta[a];
            for b in 0..=a {
                let cb = data.column(b);
                let v: f64 = (0..n).map(|i| ca[i] * w[i] * cb[i]).sum();
                hess[a * k + b] = v;
                hess[b * k + a] = v;
            }
            hess[a * k + a] += MLE_RIDGE;
        }
        let step = spd_solve(&SpdFactor::new(&hess, k)?, &grad)?;
        let size = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        beta.iter_mut().zip(&step).for_each(|(b, s)| *b += s);
        if size < 1e-10 {
            return Ok(LogisticFit { beta, converged: true, iterations: it });
        }
    }
    Ok(LogisticFit { beta, converged: false, iterations: MLE_MAX_ITER })
}
