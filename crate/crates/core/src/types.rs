//! Shared domain records: datasets, model indicators, coefficients and the
//! risk and prior settings every other module consumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the always-included feature whose coefficient is fixed to ±1.
pub const ANCHOR: usize = 0;

/// n labelled observations over K features, stored column-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    labels: Vec<u8>,
    columns: Vec<f64>,
    n: usize,
    k: usize,
    pub provenance: String,
    /// Whether the source declares a bounded conditional density for the
    /// anchor feature. `None` when unknown (e.g. ingested files).
    pub anchor_density_bounded: Option<bool>,
}

impl Dataset {
    /// Build from row vectors. Labels must be 0/1 and every entry finite.
    pub fn from_rows(labels: Vec<u8>, rows: &[Vec<f64>], provenance: impl Into<String>) -> Result<Self> {
        let n = labels.len();
        if rows.len() != n {
            return Err(Error::InvalidDataset(format!("{} labels but {} rows", n, rows.len())));
        }
        let k = rows.first().map_or(0, Vec::len);
        let mut columns = vec![0.0; n * k];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidDataset(format!("row {i} has {} features, expected {k}", row.len())));
            }
            for (j, &x) in row.iter().enumerate() {
                columns[j * n + i] = x;
            }
        }
        Self::from_columns(labels, columns, k, provenance)
    }

    /// Build from a column-major buffer of length n·K.
    pub fn from_columns(labels: Vec<u8>, columns: Vec<f64>, k: usize, provenance: impl Into<String>) -> Result<Self> {
        let n = labels.len();
        if n == 0 || k == 0 {
            return Err(Error::InvalidDataset(format!("need n >= 1 and K >= 1, got n={n}, K={k}")));
        }
        if columns.len() != n * k {
            return Err(Error::InvalidDataset(format!(
                "feature buffer has {} entries, expected {}",
                columns.len(),
                n * k
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidDataset(format!("label {} at row {i} is not binary", labels[i])));
        }
        if columns.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Self { labels, columns, n, k, provenance: provenance.into(), anchor_density_bounded: None })
    }

    pub fn with_anchor_density(mut self, bounded: Option<bool>) -> Self {
        self.anchor_density_bounded = bounded;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.n..(j + 1) * self.n]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.columns[j * self.n + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.k).map(|j| self.value(i, j)).collect()
    }

    /// Largest absolute feature value.
    pub fn max_abs(&self) -> f64 {
        self.columns.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Linear predictors xᵢᵀβ for a dense coefficient vector.
    pub fn margins(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.k, "coefficient length must equal K");
        let mut out = vec![0.0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (o, x) in out.iter_mut().zip(self.column(j)) {
                    *o += b * x;
                }
            }
        }
        out
    }

    /// Linear predictors for a model given as (β₁, active indices, active values).
    pub fn margins_sparse(&self, beta1: f64, active: &[usize], values: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.column(ANCHOR).iter().map(|x| beta1 * x).collect();
        for (&j, &b) in active.iter().zip(values) {
            for (o, x) in out.iter_mut().zip(self.column(j)) {
                *o += b * x;
            }
        }
        out
    }

    /// Row subset, preserving order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let labels: Vec<u8> = rows.iter().map(|&i| self.labels[i]).collect();
        let mut columns = Vec::with_capacity(rows.len() * self.k);
        for j in 0..self.k {
            let col = self.column(j);
            columns.extend(rows.iter().map(|&i| col[i]));
        }
        Ok(Self::from_columns(labels, columns, self.k, self.provenance.clone())?
            .with_anchor_density(self.anchor_density_bounded))
    }
}

/// Binary model indicator γ with the anchor always switched on.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelIndicator {
    bits: Vec<bool>,
    active: Vec<usize>,
}

impl ModelIndicator {
    pub fn anchor_only(k: usize) -> Self {
        let mut bits = vec![false; k];
        bits[ANCHOR] = true;
        Self { bits, active: Vec::new() }
    }

    /// Indicator with the anchor plus the given non-anchor features.
    pub fn from_active(k: usize, active: &[usize]) -> Result<Self> {
        let mut out = Self::anchor_only(k);
        for &j in active {
            if j == ANCHOR || j >= k {
                return Err(Error::ShapeMismatch(format!("feature index {j} is not a selectable feature for K={k}")));
            }
            out.set(j, true);
        }
        Ok(out)
    }

    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        if bits.first() != Some(&true) {
            return Err(Error::ShapeMismatch("anchor bit must be set".into()));
        }
        let active = bits.iter().enumerate().skip(1).filter(|(_, &b)| b).map(|(j, _)| j).collect();
        Ok(Self { bits, active })
    }

    pub fn k(&self) -> usize {
        self.bits.len()
    }

    /// |γ|₁, anchor included.
    pub fn size(&self) -> usize {
        self.active.len() + 1
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_set(&self, j: usize) -> bool {
        self.bits[j]
    }

    /// Selected non-anchor features in ascending order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Switch feature `j` (j ≥ 1) on or off.
    pub fn set(&mut self, j: usize, on: bool) {
        assert!(j != ANCHOR, "the anchor cannot be switched off");
        if self.bits[j] == on {
            return;
        }
        self.bits[j] = on;
        match self.active.binary_search(&j) {
            Ok(pos) if !on => {
                self.active.remove(pos);
            }
            Err(pos) if on => self.active.insert(pos, j),
            _ => unreachable!(),
        }
    }

    pub fn with(&self, j: usize, on: bool) -> Self {
        let mut out = self.clone();
        out.set(j, on);
        out
    }
}

/// Anchor sign and active coefficients aligned with `ModelIndicator::active`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    beta1: f64,
    pub active: Vec<f64>,
}

impl Coefficients {
    pub fn new(beta1: f64, active: Vec<f64>) -> Result<Self> {
        if beta1 != 1.0 && beta1 != -1.0 {
            return Err(Error::ShapeMismatch(format!("anchor coefficient must be ±1, got {beta1}")));
        }
        Ok(Self { beta1, active })
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn set_beta1(&mut self, positive: bool) {
        self.beta1 = if positive { 1.0 } else { -1.0 };
    }

    pub fn check_shape(&self, indicator: &ModelIndicator) -> Result<()> {
        if self.active.len() != indicator.active().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} active coefficients for a model of size {}",
                self.active.len(),
                indicator.size()
            )));
        }
        Ok(())
    }

    /// Dense β of length K: β₁ at the anchor, active values at selected
    /// positions, zeros elsewhere.
    pub fn assemble(&self, indicator: &ModelIndicator) -> Vec<f64> {
        debug_assert_eq!(self.active.len(), indicator.active().len());
        let mut beta = vec![0.0; indicator.k()];
        beta[ANCHOR] = self.beta1;
        for (&j, &b) in indicator.active().iter().zip(&self.active) {
            beta[j] = b;
        }
        beta
    }
}

/// Loss matrix ρ(y, a), indexed `rho[y][a]`.
pub type LossMatrix = [[f64; 2]; 2];

/// The 0-1 classification loss.
pub const CLASSIFICATION_LOSS: LossMatrix = [[0.0, 1.0], [1.0, 0.0]];

/// Loss matrix with its derived mixture parameters, temperature and
/// smoothing scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskSpec {
    pub rho: LossMatrix,
    pub q: f64,
    pub h: f64,
    pub psi: f64,
    pub sigma_n: f64,
    pub p0: f64,
    pub p1: f64,
    ln_p0: f64,
    ln_1m_p0: f64,
    ln_p1: f64,
    ln_1m_p1: f64,
}

/// ln(1 - e^{-x}) for x > 0, accurate at both ends.
fn ln_one_minus_exp_neg(x: f64) -> f64 {
    if x > std::f64::consts::LN_2 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

impl RiskSpec {
    pub fn new(rho: LossMatrix, psi: f64, sigma_n: f64) -> Result<Self> {
        if rho.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidRiskSpec("loss matrix entries must be finite".into()));
        }
        if rho[0][1] <= rho[0][0] {
            return Err(Error::InvalidRiskSpec(format!(
                "need rho(0,0) < rho(0,1), got {} and {}",
                rho[0][0], rho[0][1]
            )));
        }
        if rho[1][0] <= rho[1][1] {
            return Err(Error::InvalidRiskSpec(format!(
                "need rho(1,1) < rho(1,0), got {} and {}",
                rho[1][1], rho[1][0]
            )));
        }
        if !(psi > 0.0 && psi.is_finite()) {
            return Err(Error::InvalidRiskSpec(format!("temperature weight psi must be positive, got {psi}")));
        }
        if !(sigma_n > 0.0 && sigma_n.is_finite()) {
            return Err(Error::InvalidRiskSpec(format!("smoothing scale must be positive, got {sigma_n}")));
        }
        let q = rho[1][0] + rho[0][1] - rho[1][1] - rho[0][0];
        let h = (rho[0][1] - rho[0][0]) / q;
        let s = psi * q;
        // Overflow-free forms of p0 = (e^{sh}-1)/(e^s-1), p1 = (1-e^{-sh})/(1-e^{-s}).
        let l_all = ln_one_minus_exp_neg(s);
        let l_h = ln_one_minus_exp_neg(s * h);
        let l_1mh = ln_one_minus_exp_neg(s * (1.0 - h));
        let ln_p1 = l_h - l_all;
        let ln_1m_p0 = l_1mh - l_all;
        let ln_p0 = -s * (1.0 - h) + l_h - l_all;
        let ln_1m_p1 = -s * h + l_1mh - l_all;
        let p0 = ln_p0.exp();
        let p1 = ln_p1.exp();
        if !(ln_p0.is_finite() && ln_p0 < ln_p1 && ln_p1 < 0.0 && ln_1m_p1.is_finite()) {
            return Err(Error::InvalidRiskSpec(format!(
                "mixture probabilities out of range: p0={p0}, p1={p1} (psi*q = {s})"
            )));
        }
        Ok(Self { rho, q, h, psi, sigma_n, p0, p1, ln_p0, ln_1m_p0, ln_p1, ln_1m_p1 })
    }

    pub fn classification(psi: f64, sigma_n: f64) -> Result<Self> {
        Self::new(CLASSIFICATION_LOSS, psi, sigma_n)
    }

    pub fn with_psi(&self, psi: f64) -> Result<Self> {
        Self::new(self.rho, psi, self.sigma_n)
    }

    pub fn with_sigma(&self, sigma_n: f64) -> Result<Self> {
        Self::new(self.rho, self.psi, sigma_n)
    }

    /// (ln a₀, ln a₁) for label `y`, where a_s = p_s^y (1 - p_s)^{1-y}.
    pub fn log_label_weights(&self, y: u8) -> (f64, f64) {
        if y == 1 {
            (self.ln_p0, self.ln_p1)
        } else {
            (self.ln_1m_p0, self.ln_1m_p1)
        }
    }

    pub fn loss(&self, y: u8, a: bool) -> f64 {
        self.rho[y as usize][a as usize]
    }

    /// Upper bound Q = ψ⁻¹ ln(1/min{p₀, p₁, 1-p₀, 1-p₁}) on each smoothed risk term.
    pub fn term_bound(&self) -> f64 {
        let ln_min = self.ln_p0.min(self.ln_p1).min(self.ln_1m_p0).min(self.ln_1m_p1);
        -ln_min / self.psi
    }

    /// min{p₀, p₁, 1-p₀, 1-p₁}.
    pub fn min_mixture_prob(&self) -> f64 {
        self.p0.min(self.p1).min(1.0 - self.p0).min(1.0 - self.p1)
    }
}

/// Convenience wrapper matching the operation name used across the docs.
pub fn derive_risk_spec(rho: LossMatrix, psi: f64, sigma_n: f64) -> Result<RiskSpec> {
    RiskSpec::new(rho, psi, sigma_n)
}

/// Default ceiling B on max{v, 1/v}.
pub const DEFAULT_VARIANCE_BOUND: f64 = 1.0e3;

/// Size-restricted normal-binary prior on (β₁, γ, β̃_γ) with V_γ = v·I.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub lambda: f64,
    pub rbar: usize,
    pub v: f64,
    pub k: usize,
    pub variance_bound: f64,
}

impl PriorSpec {
    /// `lambda` may sit on the closed interval [0, 1]; the endpoints give
    /// degenerate (anchor-only or full) models.
    pub fn new(lambda: f64, rbar: usize, v: f64, k: usize) -> Result<Self> {
        Self::with_bound(lambda, rbar, v, k, DEFAULT_VARIANCE_BOUND)
    }

    pub fn with_bound(lambda: f64, rbar: usize, v: f64, k: usize, variance_bound: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidPrior(format!("selection probability {lambda} outside [0, 1]")));
        }
        if k == 0 {
            return Err(Error::InvalidPrior("feature count must be positive".into()));
        }
        if rbar < 1 || rbar > k {
            return Err(Error::InvalidPrior(format!("size cap {rbar} must satisfy 1 <= rbar <= K = {k}")));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidPrior(format!("prior variance must be positive, got {v}")));
        }
        if v.max(1.0 / v) > variance_bound {
            return Err(Error::InvalidPrior(format!(
                "max(v, 1/v) = {} exceeds the eigenvalue bound {variance_bound}",
                v.max(1.0 / v)
            )));
        }
        Ok(Self { lambda, rbar, v, k, variance_bound })
    }

    /// Hyperparameters sitting inside the sparsity-growth window:
    /// r̄ = max(1, ⌊M·v_n⌋) and λK = r̄/2 with v_n = nδ²/(ln n)².
    pub fn auto(n: usize, k: usize, v: f64, delta_n: f64, m: f64) -> Result<Self> {
        let vn = sparsity_budget(n, delta_n);
        let rbar = ((m * vn).floor() as usize).clamp(1, k);
        let lambda = rbar as f64 / (2.0 * k as f64);
        Self::new(lambda.min(1.0), rbar, v, k)
    }
}

/// ln n guarded below so that n = 1 does not divide by zero.
pub fn ln_n(n: usize) -> f64 {
    (n.max(2) as f64).ln()
}

/// Default rate δ_n = n^{-1/2}(ln n)².
pub fn default_delta(n: usize) -> f64 {
    ln_n(n).powi(2) / (n as f64).sqrt()
}

/// Default smoothing scale σ_n = (ln n / n)^{1/2}.
pub fn default_sigma(n: usize) -> f64 {
    (ln_n(n) / n as f64).sqrt()
}

/// v_n = nδ_n²/(ln n)², the number of "possibly large" coefficients.
pub fn sparsity_budget(n: usize, delta_n: f64) -> f64 {
    n as f64 * delta_n * delta_n / ln_n(n).powi(2)
}
