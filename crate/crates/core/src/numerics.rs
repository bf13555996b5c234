//! Scalar numerical kernels: the standard normal CDF in linear and log
//! domain, log-sum-exp, binomial coefficients and one-sided truncated
//! normal draws.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Retry cap shared by every rejection loop in the crate.
pub const MAX_REJECTIONS: u64 = 1_000_000;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Natural log of the standard normal CDF, finite for every finite `x`.
///
/// Below -30 the complementary error function is replaced by the asymptotic
/// Mills-ratio series, which is accurate to machine precision there.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > 0.0 {
        return (-normal_cdf(-x)).ln_1p();
    }
    if x > -30.0 {
        return normal_cdf(x).ln();
    }
    // ln Φ(x) = -x²/2 - ln(-x) - ln(2π)/2 + ln(1 - 1/x² + 3/x⁴ - 15/x⁶ + ...)
    let inv_x2 = 1.0 / (x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..12 {
        term *= -((2 * k - 1) as f64) * inv_x2;
        sum += term;
    }
    -0.5 * x * x - (-x).ln() - 0.5 * LN_2PI + sum.ln()
}

/// Standard normal log density.
pub fn log_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * LN_2PI
}

/// ln(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// ln Σ e^{xᵢ}.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Probability of the first of two outcomes given their unnormalized log weights.
pub fn first_of_two(log_w0: f64, log_w1: f64) -> f64 {
    if log_w0 == f64::NEG_INFINITY {
        return 0.0;
    }
    if log_w1 == f64::NEG_INFINITY {
        return 1.0;
    }
    1.0 / (1.0 + (log_w1 - log_w0).exp())
}

/// ln C(n, k).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `k·ln p` with the convention 0·ln 0 = 0.
pub fn xlogy(k: f64, p: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * p.ln()
    }
}

/// Draw X ~ N(0, 1) conditioned on X > a.
///
/// Plain rejection from the untruncated normal when the bound sits in the
/// body, and Robert's translated-exponential proposal in the tail.
pub fn standard_normal_above<R: Rng + ?Sized>(a: f64, rng: &mut R) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NumericAbort(format!("truncation point {a} is not finite")));
    }
    if a < 0.45 {
        for _ in 0..MAX_REJECTIONS {
            let x: f64 = StandardNormal.sample(rng);
            if x > a {
                return Ok(x);
            }
        }
    } else {
        let rate = 0.5 * (a + (a * a + 4.0).sqrt());
        for _ in 0..MAX_REJECTIONS {
            let e: f64 = Exp1.sample(rng);
            let x = a + e / rate;
            let u: f64 = rng.random();
            if u <= (-0.5 * (x - rate) * (x - rate)).exp() {
                return Ok(x);
            }
        }
    }
    Err(Error::NumericAbort(format!("truncated normal draw above {a} exceeded {MAX_REJECTIONS} rejections")))
}

/// Draw X ~ N(0, 1) conditioned on X ≤ b.
pub fn standard_normal_below<R: Rng + ?Sized>(b: f64, rng: &mut R) -> Result<f64> {
    standard_normal_above(-b, rng).map(|x| -x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Reference values from mpmath at 50 digits.
    #[test]
    fn normal_cdf_reference_values() {
        let cases = [
            (0.0, 0.5),
            (-1.96, 0.024_997_895_148_220_435),
            (1.0, 0.841_344_746_068_542_9),
            (-8.0, 6.220_960_574_271_784e-16),
        ];
        for (x, want) in cases {
            let got = normal_cdf(x);
            assert!(((got - want) / want).abs() < 1e-14, "Φ({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn log_cdf_extreme_tails() {
        let cases = [
            (-40.0, -804.608_442_013_753_8),
            (-30.0, -454.321_243_956_343_2),
            (-29.9, -451.322_912_458_528_6),
            (-5.0, -15.064_998_393_988_725),
            (6.0, -9.865_876_455_243_757e-10),
        ];
        for (x, want) in cases {
            let got = log_normal_cdf(x);
            assert!(((got - want) / want).abs() < 1e-13, "lnΦ({x}) = {got}, want {want}");
        }
        assert!(log_normal_cdf(-1e6).is_finite());
    }

    #[test]
    fn log_add_exp_handles_infinities() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 0.0), 0.0);
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(first_of_two(f64::NEG_INFINITY, 3.0), 0.0);
        assert_eq!(first_of_two(3.0, f64::NEG_INFINITY), 1.0);
    }

    #[test]
    fn ln_choose_small() {
        assert!((ln_choose(4, 2) - 6f64.ln()).abs() < 1e-12);
        assert_eq!(ln_choose(3, 5), f64::NEG_INFINITY);
    }

    #[test]
    fn truncated_draws_respect_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &a in &[-3.0, 0.0, 0.44, 0.46, 2.0, 12.0, 40.0] {
            for _ in 0..2000 {
                let x = standard_normal_above(a, &mut rng).unwrap();
                assert!(x > a);
                let y = standard_normal_below(-a, &mut rng).unwrap();
                assert!(y <= -a);
            }
        }
    }

    #[test]
    fn truncated_tail_mean_matches_mills_ratio() {
        // E[X | X > a] = φ(a) / (1 - Φ(a)).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &a in &[-1.0, 0.3, 1.5, 4.0] {
            let m = 200_000;
            let draws: Vec<f64> = (0..m).map(|_| standard_normal_above(a, &mut rng).unwrap()).collect();
            let mean = draws.iter().sum::<f64>() / m as f64;
            let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            let want = log_normal_pdf(a).exp() / normal_cdf(-a);
            assert!((mean - want).abs() < 4.0 * (var / m as f64).sqrt(), "a={a}: {mean} vs {want}");
        }
    }
}
