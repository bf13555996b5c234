use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_inputs, ChainOutput, SamplerConfig, SamplerState, ScanOrder, Step, TraceRow, ZUpdate};
use crate::error::{Error, Result};
use crate::linalg::{log_det_ratio_term, Design, SpdFactor};
use crate::numerics::{
    first_of_two, log_normal_cdf, log_normal_pdf, standard_normal_above, standard_normal_below, MAX_REJECTIONS,
};
use crate::prior::{log_prior_coefficients, log_prior_model};
use crate::risk::smoothed_risk_from_margins;
use crate::types::{Dataset, PriorSpec, RiskSpec, ANCHOR};

/// Σᵢ [ln N(Zᵢ; xᵢᵀβ, σ²) + ln a_{I[Zᵢ>0]}(yᵢ)] + ln π(γ) + ln π(β₁, β̃ | γ).
pub fn augmented_log_joint(state: &SamplerState, data: &Dataset, risk: &RiskSpec, prior: &PriorSpec) -> Result<f64> {
    if state.z.len() != data.n() {
        return Err(Error::ShapeMismatch(format!("latent vector of length {} for n = {}", state.z.len(), data.n())));
    }
    let sigma = risk.sigma_n;
    let mut total = 0.0;
    for ((&z, &m), &y) in state.z.iter().zip(&state.margins(data)).zip(data.labels()) {
        let (ln_a0, ln_a1) = risk.log_label_weights(y);
        total += log_normal_pdf((z - m) / sigma) - sigma.ln() + if z > 0.0 { ln_a1 } else { ln_a0 };
    }
    Ok(total
        + log_prior_model(&state.indicator, prior)
        + log_prior_coefficients(&state.coefficients, &state.indicator, prior)?)
}

/// Posterior probability that Zᵢ > 0 given its mean `margin` and label:
/// w₊ = a₁Φ(m/σ) / (a₁Φ(m/σ) + a₀Φ(-m/σ)).
pub fn z_positive_weight(margin: f64, y: u8, risk: &RiskSpec) -> f64 {
    let (ln_a0, ln_a1) = risk.log_label_weights(y);
    let t = margin / risk.sigma_n;
    first_of_two(ln_a1 + log_normal_cdf(t), ln_a0 + log_normal_cdf(-t))
}

fn draw_latent<R: Rng + ?Sized>(margin: f64, y: u8, risk: &RiskSpec, mechanism: ZUpdate, rng: &mut R) -> Result<f64> {
    let sigma = risk.sigma_n;
    match mechanism {
        ZUpdate::ExactMixture => {
            let bound = -margin / sigma;
            if rng.random::<f64>() < z_positive_weight(margin, y, risk) {
                Ok(margin + sigma * standard_normal_above(bound, rng)?)
            } else {
                Ok(margin + sigma * standard_normal_below(bound, rng)?)
            }
        }
        ZUpdate::Rejection => {
            let (ln_a0, ln_a1) = risk.log_label_weights(y);
            let ln_max = ln_a0.max(ln_a1);
            for _ in 0..MAX_REJECTIONS {
                let z = margin + sigma * rng.sample::<f64, _>(StandardNormal);
                let ln_a = if z > 0.0 { ln_a1 } else { ln_a0 };
                if rng.random::<f64>().ln() <= ln_a - ln_max {
                    return Ok(z);
                }
            }
            Err(Error::NumericAbort(format!(
                "latent update exceeded {MAX_REJECTIONS} rejections (margin {margin}, label {y})"
            )))
        }
    }
}

/// Step 1: redraw every Zᵢ from its full conditional.
pub fn step1_update_z<R: Rng + ?Sized>(
    state: &mut SamplerState,
    data: &Dataset,
    risk: &RiskSpec,
    mechanism: ZUpdate,
    rng: &mut R,
) -> Result<()> {
    let margins = state.margins(data);
    state.z.resize(data.n(), 0.0);
    for (i, (&m, &y)) in margins.iter().zip(data.labels()).enumerate() {
        state.z[i] = draw_latent(m, y, risk, mechanism, rng)?;
    }
    Ok(())
}

/// Sufficient statistics of Z for Steps 2 and 3.
struct LatentStats {
    xtz: Vec<f64>,
    norm2: f64,
}

/// Quantities of one model at a fixed β₁: the factor of S_γ, w = L⁻¹X̃ᵀZ(β₁),
/// the quadratic form |w|² and the determinant term.
struct Branch {
    active: Vec<usize>,
    factor: SpdFactor,
    w: Vec<f64>,
    quad: f64,
    ldt: f64,
}

struct Kernel<'a> {
    design: Design<'a>,
    prior: &'a PriorSpec,
    sigma: f64,
}

impl<'a> Kernel<'a> {
    fn new(data: &'a Dataset, risk: &'a RiskSpec, prior: &'a PriorSpec) -> Self {
        Self { design: Design::new(data), prior, sigma: risk.sigma_n }
    }

    fn stats(&self, z: &[f64]) -> LatentStats {
        LatentStats { xtz: self.design.xt(z), norm2: z.iter().map(|x| x * x).sum() }
    }

    /// |Z(β₁)|² = |Z|² - 2β₁x₁ᵀZ + |x₁|².
    fn shifted_norm2(&self, s: &LatentStats, beta1: f64) -> f64 {
        s.norm2 - 2.0 * beta1 * s.xtz[ANCHOR] + self.design.gram(ANCHOR, ANCHOR)
    }

    fn branch(&self, s: &LatentStats, beta1: f64, active: Vec<usize>) -> Result<Branch> {
        let factor = self.design.sgamma(&active, self.sigma, self.prior.v)?;
        let u = self.design.shifted_xt(&s.xtz, beta1, &active);
        let w = factor.forward(&u)?;
        let quad = w.iter().map(|x| x * x).sum();
        let ldt = log_det_ratio_term(&factor, self.sigma, self.prior.v);
        Ok(Branch { active, factor, w, quad, ldt })
    }

    /// Step 2a log weights for β₁ = +1 and β₁ = -1 given the current model.
    fn sign_log_weights(&self, s: &LatentStats, active: &[usize]) -> Result<(f64, f64)> {
        let inv2 = 0.5 / (self.sigma * self.sigma);
        let mut out = [0.0; 2];
        for (slot, beta1) in out.iter_mut().zip([1.0, -1.0]) {
            let b = self.branch(s, beta1, active.to_vec())?;
            *slot = 0.5f64.ln() + inv2 * (b.quad - self.shifted_norm2(s, beta1));
        }
        Ok((out[0], out[1]))
    }

    /// Step 2b log weight of a model, with the common -½σ⁻²|Z(β₁)|² dropped.
    fn model_log_weight(&self, b: &Branch, included: bool) -> f64 {
        if b.active.len() + 1 > self.prior.rbar {
            return f64::NEG_INFINITY;
        }
        let prior_term = if included { self.prior.lambda.ln() } else { (1.0 - self.prior.lambda).ln() };
        prior_term + 0.5 * b.quad / (self.sigma * self.sigma) + b.ldt
    }

    fn toggled(active: &[usize], j: usize, on: bool) -> Vec<usize> {
        let mut out = active.to_vec();
        match (out.binary_search(&j), on) {
            (Err(p), true) => out.insert(p, j),
            (Ok(p), false) => {
                out.remove(p);
            }
            _ => {}
        }
        out
    }

    /// Log weights of γⱼ = 0 and γⱼ = 1 with every other component fixed.
    fn indicator_log_weights(&self, s: &LatentStats, beta1: f64, active: &[usize], j: usize) -> Result<(f64, f64)> {
        let off = self.branch(s, beta1, Self::toggled(active, j, false))?;
        let on_active = Self::toggled(active, j, true);
        let on = if on_active.len() + 1 > self.prior.rbar {
            f64::NEG_INFINITY
        } else {
            self.model_log_weight(&self.branch(s, beta1, on_active)?, true)
        };
        Ok((self.model_log_weight(&off, false), on))
    }

    fn update_sign<R: Rng + ?Sized>(&self, state: &mut SamplerState, s: &LatentStats, rng: &mut R) -> Result<bool> {
        let (lp, lm) = self.sign_log_weights(s, state.indicator.active())?;
        let positive = rng.random::<f64>() < first_of_two(lp, lm);
        let changed = positive != (state.coefficients.beta1() > 0.0);
        state.coefficients.set_beta1(positive);
        Ok(changed)
    }

    /// Step 2b sweep. Keeps the current model's branch cached and factors
    /// only the alternative for each j. Returns the number of flips and the
    /// branch of the final model.
    fn update_indicator<R: Rng + ?Sized>(
        &self,
        state: &mut SamplerState,
        s: &LatentStats,
        order: &[usize],
        rng: &mut R,
    ) -> Result<(u64, Branch)> {
        let beta1 = state.coefficients.beta1();
        let mut current = self.branch(s, beta1, state.indicator.active().to_vec())?;
        let mut flips = 0;
        for &j in order {
            let was_on = state.indicator.is_set(j);
            let alt_active = Self::toggled(&current.active, j, !was_on);
            if !was_on && alt_active.len() + 1 > self.prior.rbar {
                continue;
            }
            let alt = self.branch(s, beta1, alt_active)?;
            let lw_cur = self.model_log_weight(&current, was_on);
            let lw_alt = self.model_log_weight(&alt, !was_on);
            if rng.random::<f64>() >= first_of_two(lw_cur, lw_alt) {
                state.indicator.set(j, !was_on);
                current = alt;
                flips += 1;
            }
        }
        Ok((flips, current))
    }

    /// Step 3: β̃ ~ N(S⁻¹u, σ²S⁻¹) drawn as S⁻¹u + σL⁻ᵀε.
    fn update_coefficients<R: Rng + ?Sized>(&self, state: &mut SamplerState, b: &Branch, rng: &mut R) -> Result<()> {
        let eps: Vec<f64> = (0..b.active.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mean = b.factor.backward(&b.w)?;
        let noise = b.factor.backward(&eps)?;
        state.coefficients.active = mean.iter().zip(&noise).map(|(m, e)| m + self.sigma * e).collect();
        Ok(())
    }
}

/// Step 2a log weights (β₁ = +1, β₁ = -1) at the state's Z and model.
pub fn step2a_log_weights(
    state: &SamplerState,
    data: &Dataset,
    risk: &RiskSpec,
    prior: &PriorSpec,
) -> Result<(f64, f64)> {
    let kernel = Kernel::new(data, risk, prior);
    kernel.sign_log_weights(&kernel.stats(&state.z), state.indicator.active())
}

pub fn step2a_update_sign<R: Rng + ?Sized>(
    state: &mut SamplerState,
    data: &Dataset,
    risk: &RiskSpec,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<()> {
    let kernel = Kernel::new(data, risk, prior);
    let s = kernel.stats(&state.z);
    kernel.update_sign(state, &s, rng).map(|_| ())
}

/// Step 2b log weights (γⱼ = 0, γⱼ = 1) at the state's Z, β₁ and remaining
/// indicator components. Terms common to both branches are dropped.
pub fn step2b_branch_log_weights(
    state: &SamplerState,
    data: &Dataset,
    risk: &RiskSpec,
    prior: &PriorSpec,
    j: usize,
) -> Result<(f64, f64)> {
    if j == ANCHOR || j >= data.k() {
        return Err(Error::ShapeMismatch(format!("feature {j} is not selectable")));
    }
    let kernel = Kernel::new(data, risk, prior);
    let s = kernel.stats(&state.z);
    kernel.indicator_log_weights(&s, state.coefficients.beta1(), state.indicator.active(), j)
}

/// One Step 2b sweep. The active coefficients are left untouched and must be
/// redrawn by Step 3 before the state is used as a coefficient vector.
pub fn step2b_update_indicator<R: Rng + ?Sized>(
    state: &mut SamplerState,
    data: &Dataset,
    risk: &RiskSpec,
    prior: &PriorSpec,
    scan_order: ScanOrder,
    rng: &mut R,
) -> Result<u64> {
    let kernel = Kernel::new(data, risk, prior);
    let s = kernel.stats(&state.z);
    let mut order: Vec<usize> = (1..data.k()).collect();
    if scan_order == ScanOrder::RandomPermutation {
        order.shuffle(rng);
    }
    let (flips, b) = kernel.update_indicator(state, &s, &order, rng)?;
    // Keep the pair consistent: any changed model gets its conditional mean.
    if flips > 0 {
        state.coefficients.active = b.factor.backward(&b.w)?;
    }
    Ok(flips)
}

pub fn step3_update_coefficients<R: Rng + ?Sized>(
    state: &mut SamplerState,
    data: &Dataset,
    risk: &RiskSpec,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<()> {
    let kernel = Kernel::new(data, risk, prior);
    let s = kernel.stats(&state.z);
    let b = kernel.branch(&s, state.coefficients.beta1(), state.indicator.active().to_vec())?;
    kernel.update_coefficients(state, &b, rng)
}

pub fn run_chain(data: &Dataset, risk: &RiskSpec, prior: &PriorSpec, config: &SamplerConfig) -> Result<ChainOutput> {
    check_inputs(data, risk, prior, config)?;
    let kernel = Kernel::new(data, risk, prior);
    let mut rng_z = config.rng(Step::Latent);
    let mut rng_sign = config.rng(Step::Sign);
    let mut rng_ind = config.rng(Step::Indicator);
    let mut rng_coef = config.rng(Step::Coefficients);
    let mut rng_scan = config.rng(Step::Scan);

    let mut state = SamplerState::initial(data.n(), data.k());
    step1_update_z(&mut state, data, risk, config.z_update, &mut config.rng(Step::Init))?;

    let mut order: Vec<usize> = (1..data.k()).collect();
    let mut draws = Vec::with_capacity(config.retained());
    let mut trace = Vec::with_capacity(config.iterations);
    let (mut proposals, mut accepted) = (0u64, 0u64);

    for sweep in 1..=config.iterations {
        step1_update_z(&mut state, data, risk, config.z_update, &mut rng_z)?;
        let s = kernel.stats(&state.z);
        let sign_changed = kernel.update_sign(&mut state, &s, &mut rng_sign)?;
        if config.scan_order == ScanOrder::RandomPermutation {
            order.shuffle(&mut rng_scan);
        }
        let (flips, branch) = kernel.update_indicator(&mut state, &s, &order, &mut rng_ind)?;
        kernel.update_coefficients(&mut state, &branch, &mut rng_coef)?;
        state.iteration = sweep;

        let moves = flips + sign_changed as u64;
        proposals += data.k() as u64;
        accepted += moves;
        let margins = state.margins(data);
        let r_n = smoothed_risk_from_margins(&margins, data.labels(), risk);
        if !r_n.is_finite() {
            return Err(Error::NumericAbort(format!("smoothed risk is not finite at sweep {sweep}")));
        }
        trace.push(TraceRow {
            iteration: sweep,
            model_size: state.indicator.size(),
            r_n_smoothed: r_n,
            beta1: state.coefficients.beta1(),
            accepted_moves: moves,
        });
        if config.keeps(sweep) {
            draws.push(state.draw());
        }
    }
    Ok(ChainOutput { draws, trace, proposals, accepted, k: data.k(), config: config.clone() })
}
