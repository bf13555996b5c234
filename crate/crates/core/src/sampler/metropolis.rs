use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_inputs, ChainOutput, SamplerConfig, SamplerState, Step, TraceRow};
use crate::error::Result;
use crate::risk::{empirical_risk_from_margins, smoothed_risk_from_margins};
use crate::types::{Dataset, PriorSpec, RiskSpec, ANCHOR};

/// Log target exp(-nψR⁽ⁱ⁾)·π up to the factors the moves below cancel.
fn log_likelihood(margins: &[f64], data: &Dataset, risk: &RiskSpec) -> f64 {
    -(data.n() as f64) * risk.psi * empirical_risk_from_margins(margins, data.labels(), risk)
}

fn shifted(margins: &[f64], col: &[f64], delta: f64) -> Vec<f64> {
    margins.iter().zip(col).map(|(m, x)| m + delta * x).collect()
}

/// Random-walk Metropolis on the unsmoothed empirical risk. Each sweep
/// makes K + 1 proposals, each chosen uniformly among: toggle one γⱼ (a
/// birth draws the new coefficient from its prior), perturb one active
/// coefficient by N(0, mh_step²), or flip β₁.
pub fn run_metropolis(
    data: &Dataset,
    risk: &RiskSpec,
    prior: &PriorSpec,
    config: &SamplerConfig,
) -> Result<ChainOutput> {
    check_inputs(data, risk, prior, config)?;
    let k = data.k();
    let mut rng = config.rng(Step::Metropolis);
    let mut state = SamplerState::initial(0, k);
    let mut margins = state.margins(data);
    let mut log_lik = log_likelihood(&margins, data, risk);
    let ln_odds = prior.lambda.ln() - (1.0 - prior.lambda).ln();
    let sd = prior.v.sqrt();

    let mut draws = Vec::with_capacity(config.retained());
    let mut trace = Vec::with_capacity(config.iterations);
    let (mut proposals, mut accepted) = (0u64, 0u64);

    for sweep in 1..=config.iterations {
        let mut moves = 0u64;
        for _ in 0..=k {
            proposals += 1;
            let kind = rng.random_range(0..3u8);
            // (log acceptance ratio, proposed margins, state change)
            let proposal = match kind {
                0 if k > 1 => {
                    let j = rng.random_range(1..k);
                    if state.indicator.is_set(j) {
                        let pos = state.indicator.active().binary_search(&j).expect("active index");
                        let b = state.coefficients.active[pos];
                        let m = shifted(&margins, data.column(j), -b);
                        let ll = log_likelihood(&m, data, risk);
                        Some((ll - log_lik - ln_odds, m, ll, Change::Death(j, pos)))
                    } else if state.indicator.size() < prior.rbar {
                        let b = sd * rng.sample::<f64, _>(StandardNormal);
                        let m = shifted(&margins, data.column(j), b);
                        let ll = log_likelihood(&m, data, risk);
                        Some((ll - log_lik + ln_odds, m, ll, Change::Birth(j, b)))
                    } else {
                        None
                    }
                }
                1 if !state.coefficients.active.is_empty() => {
                    let pos = rng.random_range(0..state.coefficients.active.len());
                    let j = state.indicator.active()[pos];
                    let old = state.coefficients.active[pos];
                    let new = old + config.mh_step * rng.sample::<f64, _>(StandardNormal);
                    let m = shifted(&margins, data.column(j), new - old);
                    let ll = log_likelihood(&m, data, risk);
                    let prior_ratio = (old * old - new * new) / (2.0 * prior.v);
                    Some((ll - log_lik + prior_ratio, m, ll, Change::Perturb(pos, new)))
                }
                2 => {
                    let b1 = state.coefficients.beta1();
                    let m = shifted(&margins, data.column(ANCHOR), -2.0 * b1);
                    let ll = log_likelihood(&m, data, risk);
                    Some((ll - log_lik, m, ll, Change::Flip))
                }
                _ => None,
            };
            let Some((log_ratio, m, ll, change)) = proposal else { continue };
            if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
                match change {
                    Change::Death(j, pos) => {
                        state.indicator.set(j, false);
                        state.coefficients.active.remove(pos);
                    }
                    Change::Birth(j, b) => {
                        state.indicator.set(j, true);
                        let pos = state.indicator.active().binary_search(&j).expect("just inserted");
                        state.coefficients.active.insert(pos, b);
                    }
                    Change::Perturb(pos, v) => state.coefficients.active[pos] = v,
                    Change::Flip => {
                        let positive = state.coefficients.beta1() < 0.0;
                        state.coefficients.set_beta1(positive);
                    }
                }
                margins = m;
                log_lik = ll;
                moves += 1;
            }
        }
        accepted += moves;
        state.iteration = sweep;
        trace.push(TraceRow {
            iteration: sweep,
            model_size: state.indicator.size(),
            r_n_smoothed: smoothed_risk_from_margins(&margins, data.labels(), risk),
            beta1: state.coefficients.beta1(),
            accepted_moves: moves,
        });
        if config.keeps(sweep) {
            draws.push(state.draw());
        }
    }
    Ok(ChainOutput { draws, trace, proposals, accepted, k, config: config.clone() })
}

enum Change {
    Death(usize, usize),
    Birth(usize, f64),
    Perturb(usize, f64),
    Flip,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_sparse_linear;
    use crate::prior::model_size_distribution;
    use crate::sampler::Backend;

    #[test]
    fn flat_target_recovers_prior_sizes() {
        let (d, _) = gen_sparse_linear(12, 30, 2, 1.0, 0.1, 4).unwrap();
        let risk = RiskSpec::classification(1e-8, 0.3).unwrap();
        let prior = PriorSpec::new(0.2, 5, 1.0, 12).unwrap();
        let mut cfg = SamplerConfig::new(20_000, 1000, 7);
        cfg.backend = Backend::Metropolis;
        let out = run_metropolis(&d, &risk, &prior, &cfg).unwrap();
        let want = model_size_distribution(&prior);
        let mut got = vec![0.0; want.len()];
        for dr in &out.draws {
            got[dr.size() - 1] += 1.0 / out.draws.len() as f64;
        }
        let tv: f64 = 0.5 * want.iter().zip(&got).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 0.05, "tv = {tv}");
        let rate = out.acceptance_rate();
        assert!(rate > 0.0 && rate < 1.0);
        assert_eq!(out, run_metropolis(&d, &risk, &prior, &cfg).unwrap());
    }
}
