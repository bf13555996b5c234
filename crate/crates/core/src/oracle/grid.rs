//! Exhaustive discretization of the Gibbs posterior on toy problems.
//!
//! Each active coefficient ranges over g cells of width h = 2G/(g-1)
//! centred at -G, -G+h, …, G. A cell's prior weight is its exact Gaussian
//! mass, and its likelihood factor exp(-nψR) is averaged over `subcells`
//! equal slices per axis, each weighted by its own Gaussian mass. With one
//! subcell this is the plain cell-centre rule.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, normal_cdf, xlogy};
use crate::prior::log_prior_model;
use crate::risk::{empirical_risk_from_margins, smoothed_risk_from_margins};
use crate::sampler::Draw;
use crate::types::{Dataset, ModelIndicator, PriorSpec, RiskSpec};

use super::stats::tv_distance;

/// Which sample risk the posterior is built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridRisk {
    Smoothed,
    Unsmoothed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
    pub subcells: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize) -> Self {
        Self { half_width, points, subcells: 1 }
    }

    pub fn with_subcells(mut self, subcells: usize) -> Self {
        self.subcells = subcells;
        self
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn center(&self, cell: usize) -> f64 {
        -self.half_width + cell as f64 * self.step()
    }

    /// Cell containing `x`, or `None` outside [-G - h/2, G + h/2).
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let pos = ((x + self.half_width) / self.step() + 0.5).floor();
        (pos >= 0.0 && pos < self.points as f64).then_some(pos as usize)
    }
}

/// Bin label shared by grid points and binned MCMC draws. `None` cells mark
/// coefficients outside the grid range.
pub type BinKey = (bool, Vec<usize>, Vec<Option<usize>>);

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub beta1: f64,
    pub active: Vec<usize>,
    pub cells: Vec<usize>,
    pub prob: f64,
    /// Prior mass of the point, normalized over the grid.
    pub prior_mass: f64,
    /// Effective risk: -(nψ)⁻¹ ln of the prior-weighted cell average of exp(-nψR).
    pub risk: f64,
}

impl GridPoint {
    pub fn key(&self) -> BinKey {
        (self.beta1 > 0.0, self.active.clone(), self.cells.iter().map(|&c| Some(c)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPosterior {
    pub points: Vec<GridPoint>,
    pub spec: GridSpec,
    pub n: usize,
    pub psi: f64,
}

fn enumerate_models(k: usize, rbar: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..1 << (k - 1) {
        let active: Vec<usize> = (0..k - 1).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
        if active.len() < rbar {
            out.push(active);
        }
    }
    out
}

/// Gaussian N(0, v) mass and equal-width slices of one cell.
fn cell_slices(spec: &GridSpec, cell: usize, v: f64) -> Vec<(f64, f64)> {
    let h = spec.step();
    let lo = spec.center(cell) - 0.5 * h;
    let w = h / spec.subcells as f64;
    let sd = v.sqrt();
    (0..spec.subcells)
        .map(|s| {
            let a = lo + s as f64 * w;
            let mass = normal_cdf((a + w) / sd) - normal_cdf(a / sd);
            (a + 0.5 * w, mass)
        })
        .collect()
}

/// (β₁, active set, cells, log prior mass, log cell-averaged likelihood).
type RawPoint = (f64, Vec<usize>, Vec<usize>, f64, f64);

pub fn exact_grid_posterior(
    data: &Dataset,
    risk: &RiskSpec,
    prior: &PriorSpec,
    spec: GridSpec,
    kind: GridRisk,
) -> Result<GridPosterior> {
    let k = data.k();
    if k > 4 || prior.rbar > 3 || spec.points > 41 || spec.points < 2 || spec.subcells == 0 || spec.subcells > 64 {
        return Err(Error::Guard(format!(
            "grid posterior needs K <= 4, rbar <= 3, 2 <= g <= 41, 1 <= subcells <= 64; got K={k}, rbar={}, g={}, subcells={}",
            prior.rbar, spec.points, spec.subcells
        )));
    }
    if prior.k != k {
        return Err(Error::ShapeMismatch(format!("prior over {} features, data has {k}", prior.k)));
    }
    let scale = data.n() as f64 * risk.psi;
    let sample_risk = |m: &[f64]| match kind {
        GridRisk::Smoothed => smoothed_risk_from_margins(m, data.labels(), risk),
        GridRisk::Unsmoothed => empirical_risk_from_margins(m, data.labels(), risk),
    };
    let slices: Vec<Vec<(f64, f64)>> = (0..spec.points).map(|c| cell_slices(&spec, c, prior.v)).collect();

    // Unnormalized (log prior mass, log cell-averaged likelihood) per point.
    let mut raw: Vec<RawPoint> = Vec::new();
    for active in enumerate_models(k, prior.rbar) {
        let lp_model = log_prior_model(&ModelIndicator::from_active(k, &active)?, prior);
        let d = active.len();
        let n_cells = spec.points.pow(d as u32);
        for beta1 in [1.0, -1.0] {
            for flat in 0..n_cells {
                let cells: Vec<usize> = (0..d).map(|a| flat / spec.points.pow(a as u32) % spec.points).collect();
                let n_sub = spec.subcells.pow(d as u32);
                let mut terms = Vec::with_capacity(n_sub);
                let cell_mass: f64 = cells.iter().map(|&c| slices[c].iter().map(|s| s.1).sum::<f64>()).product();
                for sub in 0..n_sub {
                    let mut values = Vec::with_capacity(d);
                    let mut mass = 1.0;
                    for (a, &c) in cells.iter().enumerate() {
                        let (x, m) = slices[c][sub / spec.subcells.pow(a as u32) % spec.subcells];
                        values.push(x);
                        mass *= m;
                    }
                    let margins = data.margins_sparse(beta1, &active, &values);
                    terms.push(mass.ln() - scale * sample_risk(&margins));
                }
                let log_avg_lik = log_sum_exp(&terms) - cell_mass.ln();
                let log_prior = lp_model + 0.5f64.ln() + cell_mass.ln();
                raw.push((beta1, active.clone(), cells, log_prior, log_avg_lik));
            }
        }
    }
    let log_post: Vec<f64> = raw.iter().map(|r| r.3 + r.4).collect();
    let log_prior: Vec<f64> = raw.iter().map(|r| r.3).collect();
    let (zp, zq) = (log_sum_exp(&log_post), log_sum_exp(&log_prior));
    let points = raw
        .into_iter()
        .zip(log_post)
        .map(|((beta1, active, cells, lp, ll), lq)| GridPoint {
            beta1,
            active,
            cells,
            prob: (lq - zp).exp(),
            prior_mass: (lp - zq).exp(),
            risk: -ll / scale,
        })
        .collect();
    Ok(GridPosterior { points, spec, n: data.n(), psi: risk.psi })
}

impl GridPosterior {
    pub fn distribution(&self) -> BTreeMap<BinKey, f64> {
        self.points.iter().map(|p| (p.key(), p.prob)).collect()
    }

    pub fn prior_distribution(&self) -> BTreeMap<BinKey, f64> {
        self.points.iter().map(|p| (p.key(), p.prior_mass)).collect()
    }

    pub fn bin(&self, draw: &Draw) -> BinKey {
        (draw.beta1 > 0.0, draw.active.clone(), draw.values.iter().map(|&x| self.spec.cell_of(x)).collect())
    }

    pub fn binned(&self, draws: &[Draw]) -> BTreeMap<BinKey, f64> {
        super::stats::empirical(draws.iter().map(|d| self.bin(d)))
    }

    /// Total variation between the grid posterior and binned draws.
    pub fn tv_to_draws(&self, draws: &[Draw]) -> f64 {
        tv_distance(&self.distribution(), &self.binned(draws))
    }

    pub fn mode(&self) -> &GridPoint {
        self.points.iter().max_by(|a, b| a.prob.total_cmp(&b.prob)).expect("grid is nonempty")
    }

    /// F(q) = Σ q·nR + ψ⁻¹ Σ q ln(q/π) for a distribution q over the grid points.
    pub fn free_energy(&self, q: &[f64]) -> f64 {
        let n = self.n as f64;
        self.points
            .iter()
            .zip(q)
            .map(|(p, &w)| w * n * p.risk + (xlogy(w, w) - xlogy(w, p.prior_mass)) / self.psi)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariationalReport {
    pub gibbs_value: f64,
    pub prior_value: f64,
    pub trials: usize,
    /// Smallest F(q′) - F(w_gibbs) over the trials.
    pub min_gap: f64,
    pub passed: bool,
}

/// Compare F at the grid posterior against the prior and `trials` random
/// perturbations: multiplicative log-normal tilts of the posterior and
/// Dirichlet draws centred on the prior.
pub fn variational_check<R: Rng + ?Sized>(grid: &GridPosterior, trials: usize, rng: &mut R) -> VariationalReport {
    let post: Vec<f64> = grid.points.iter().map(|p| p.prob).collect();
    let prior: Vec<f64> = grid.points.iter().map(|p| p.prior_mass).collect();
    let f_gibbs = grid.free_energy(&post);
    let f_prior = grid.free_energy(&prior);
    let mut min_gap = f_prior - f_gibbs;
    for t in 0..trials {
        let mut q: Vec<f64> = if t % 2 == 0 {
            let tau = 0.01 + 2.0 * rng.random::<f64>();
            post.iter().map(|&p| p * (tau * rng.sample::<f64, _>(StandardNormal)).exp()).collect()
        } else {
            let conc = 0.5 + 50.0 * rng.random::<f64>();
            prior
                .iter()
                .map(|&p| {
                    Gamma::new((conc * p * prior.len() as f64).max(1e-3), 1.0).expect("positive shape").sample(rng)
                })
                .collect()
        };
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|x| *x /= s);
        min_gap = min_gap.min(grid.free_energy(&q) - f_gibbs);
    }
    VariationalReport { gibbs_value: f_gibbs, prior_value: f_prior, trials, min_gap, passed: min_gap >= -1e-9 }
}
