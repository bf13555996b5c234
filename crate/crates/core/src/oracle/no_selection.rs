//! Rules that never select variables cannot learn off the observed coordinates.
//!
//! On one-hot grid data only the columns hit by a training point carry any
//! information. Coefficients elsewhere stay at their symmetric prior draw,
//! so each unseen grid level is classified correctly with probability one
//! half and the risk is at least 0.5(1 - n/K).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::rng::{stream_rng, AUX_STREAM};
use crate::types::ANCHOR;

#[derive(Clone, Debug, PartialEq)]
pub struct NoSelectionResult {
    pub estimate: f64,
    pub se: f64,
    /// 0.5(1 - n/K).
    pub bound: f64,
    pub draws: usize,
}

impl NoSelectionResult {
    /// estimate ≥ bound - 3·SE.
    pub fn holds(&self) -> bool {
        self.estimate >= self.bound - 3.0 * self.se
    }
}

/// Average, over `draws` replications of (training sample, prior draw of β),
/// the exact misclassification probability of I[xᵀβ > 0] for a future grid
/// point. Observed coordinates get the correct sign; the rest keep their
/// N(0, 1) draw, and an unobserved anchor keeps a random sign.
pub fn no_selection_experiment(k: usize, n: usize, seed: u64, draws: usize) -> Result<NoSelectionResult> {
    if k <= n {
        return Err(Error::InvalidConfig(format!("needs K > n, got K = {k}, n = {n}")));
    }
    if draws < 2 {
        return Err(Error::InvalidConfig("needs at least two replications".into()));
    }
    let gen = GeneratorSpec::indicator_grid(k)?;
    let mut rng = stream_rng(seed, AUX_STREAM);
    let mut risks = Vec::with_capacity(draws);
    for _ in 0..draws {
        let data = gen.sample_with(n, &mut rng)?;
        let mut seen = vec![false; k];
        for i in 0..n {
            let hot = (0..k).find(|&j| data.value(i, j) == 1.0).expect("one-hot rows");
            seen[hot] = true;
        }
        let mut wrong = 0usize;
        for (j, &obs) in seen.iter().enumerate() {
            let beta_j: f64 = if obs {
                if j == ANCHOR {
                    1.0
                } else {
                    -1.0
                }
            } else if j == ANCHOR {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.sample(StandardNormal)
            };
            // Column j hot: margin = β_j, label = I[j = anchor].
            if (beta_j > 0.0) != (j == ANCHOR) {
                wrong += 1;
            }
        }
        risks.push(wrong as f64 / k as f64);
    }
    let m = draws as f64;
    let estimate = risks.iter().sum::<f64>() / m;
    let var = risks.iter().map(|r| (r - estimate).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(NoSelectionResult { estimate, se: (var / m).sqrt(), bound: 0.5 * (1.0 - n as f64 / k as f64), draws })
}
