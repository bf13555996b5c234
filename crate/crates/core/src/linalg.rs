//! Dense SPD kernels for S_γ = (σ²/v)I + X̃_γᵀX̃_γ.

use crate::error::{Error, Result};
use crate::types::{Dataset, ModelIndicator, ANCHOR};

/// Above this many features the Gram matrix is not cached.
pub const GRAM_CACHE_LIMIT: usize = 2048;

/// Cholesky factor S = LLᵀ of a d×d SPD matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdFactor {
    d: usize,
    l: Vec<f64>,
    log_det: f64,
}

fn try_cholesky(s: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut acc = s[i * d + j];
            for p in 0..j {
                acc -= l[i * d + p] * l[j * d + p];
            }
            if i == j {
                if acc.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !acc.is_finite() {
                    return None;
                }
                l[i * d + i] = acc.sqrt();
            } else {
                l[i * d + j] = acc / l[j * d + j];
            }
        }
    }
    Some(l)
}

impl SpdFactor {
    /// Factor a symmetric matrix given row-major. A failed factorization is
    /// retried once with 1e-10·trace/d added to the diagonal.
    pub fn new(s: &[f64], d: usize) -> Result<Self> {
        if s.len() != d * d {
            return Err(Error::ShapeMismatch(format!("matrix has {} entries, expected {}", s.len(), d * d)));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericAbort("non-finite entry in SPD matrix".into()));
        }
        let l = match try_cholesky(s, d) {
            Some(l) => l,
            None => {
                let trace: f64 = (0..d).map(|i| s[i * d + i]).sum();
                let jitter = 1e-10 * trace.abs() / d as f64;
                let mut t = s.to_vec();
                for i in 0..d {
                    t[i * d + i] += jitter;
                }
                try_cholesky(&t, d).ok_or_else(|| {
                    Error::NumericAbort(format!("{d}x{d} matrix is not positive definite after jitter"))
                })?
            }
        };
        let log_det = 2.0 * (0..d).map(|i| l[i * d + i].ln()).sum::<f64>();
        Ok(Self { d, l, log_det })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn lower(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.d + j]
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.d {
            return Err(Error::ShapeMismatch(format!("vector of length {len} for a {0}x{0} factor", self.d)));
        }
        Ok(())
    }

    /// L⁻¹b.
    pub fn forward(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b.len())?;
        let d = self.d;
        let mut y = b.to_vec();
        for i in 0..d {
            let row = &self.l[i * d..i * d + i];
            let acc = y[i] - row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum::<f64>();
            y[i] = acc / self.l[i * d + i];
        }
        Ok(y)
    }

    /// L⁻ᵀb.
    pub fn backward(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b.len())?;
        let d = self.d;
        let mut x = b.to_vec();
        for i in (0..d).rev() {
            let acc = x[i] - (i + 1..d).map(|p| self.l[p * d + i] * x[p]).sum::<f64>();
            x[i] = acc / self.l[i * d + i];
        }
        Ok(x)
    }

    /// uᵀS⁻¹u = |L⁻¹u|².
    pub fn inv_quad(&self, u: &[f64]) -> Result<f64> {
        Ok(self.forward(u)?.iter().map(|x| x * x).sum())
    }

    /// LLᵀ, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let d = self.d;
        let mut s = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                s[i * d + j] = (0..=i.min(j)).map(|p| self.l[i * d + p] * self.l[j * d + p]).sum();
            }
        }
        s
    }
}

pub fn spd_solve(factor: &SpdFactor, rhs: &[f64]) -> Result<Vec<f64>> {
    factor.backward(&factor.forward(rhs)?)
}

/// -½ ln det[I + σ⁻²vX̃ᵀX̃] = -½(ln det S_γ + d ln(v/σ²)).
pub fn log_det_ratio_term(factor: &SpdFactor, sigma: f64, v: f64) -> f64 {
    -0.5 * (factor.log_det() + factor.dim() as f64 * (v / (sigma * sigma)).ln())
}

/// Assemble S_γ for the selected non-anchor columns from a Gram accessor.
pub fn sgamma_matrix(active: &[usize], sigma: f64, v: f64, gram: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let d = active.len();
    let ridge = sigma * sigma / v;
    let mut s = vec![0.0; d * d];
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate().take(a + 1) {
            let g = gram(i, j);
            s[a * d + b] = g;
            s[b * d + a] = g;
        }
        s[a * d + a] += ridge;
    }
    s
}

pub fn build_sgamma(data: &Dataset, indicator: &ModelIndicator, sigma: f64, v: f64) -> Result<SpdFactor> {
    if !(sigma > 0.0 && v > 0.0) {
        return Err(Error::InvalidConfig(format!("need sigma > 0 and v > 0, got {sigma}, {v}")));
    }
    if indicator.k() != data.k() {
        return Err(Error::ShapeMismatch(format!("indicator over {} features, data has {}", indicator.k(), data.k())));
    }
    let dot = |i: usize, j: usize| data.column(i).iter().zip(data.column(j)).map(|(a, b)| a * b).sum();
    let d = indicator.active().len();
    SpdFactor::new(&sgamma_matrix(indicator.active(), sigma, v, dot), d)
}

/// Column inner products of a dataset, cached when K is small enough.
#[derive(Clone, Debug)]
pub struct Design<'a> {
    data: &'a Dataset,
    gram: Option<Vec<f64>>,
}

impl<'a> Design<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        let k = data.k();
        let gram = (k <= GRAM_CACHE_LIMIT).then(|| {
            let mut g = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..=i {
                    let v: f64 = data.column(i).iter().zip(data.column(j)).map(|(a, b)| a * b).sum();
                    g[i * k + j] = v;
                    g[j * k + i] = v;
                }
            }
            g
        });
        Self { data, gram }
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn gram(&self, i: usize, j: usize) -> f64 {
        match &self.gram {
            Some(g) => g[i * self.data.k() + j],
            None => self.data.column(i).iter().zip(self.data.column(j)).map(|(a, b)| a * b).sum(),
        }
    }

    /// Xᵀz for every column.
    pub fn xt(&self, z: &[f64]) -> Vec<f64> {
        (0..self.data.k()).map(|j| self.data.column(j).iter().zip(z).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn sgamma(&self, active: &[usize], sigma: f64, v: f64) -> Result<SpdFactor> {
        SpdFactor::new(&sgamma_matrix(active, sigma, v, |i, j| self.gram(i, j)), active.len())
    }

    /// X̃ᵀZ(β₁) = Xᵀz restricted to `active`, minus β₁ times the anchor Gram row.
    pub fn shifted_xt(&self, xtz: &[f64], beta1: f64, active: &[usize]) -> Vec<f64> {
        active.iter().map(|&j| xtz[j] - beta1 * self.gram(ANCHOR, j)).collect()
    }
}
