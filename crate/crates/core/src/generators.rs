//! Synthetic data sources and CSV ingestion.
//!
//! Three generators cover the experiments: a misspecified logistic example
//! where the likelihood-optimal classifier is risk-suboptimal, a one-hot grid
//! where rules without variable selection fail, and a sparse linear truth
//! with label noise. Every emitted dataset keeps features within [-1, 1].

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, DATA_STREAM, TRUTH_STREAM};
use crate::types::{Dataset, ANCHOR};

/// A finite-support point: probability, feature row, P(y = 1 | x).
#[derive(Clone, Debug, PartialEq)]
pub struct SupportPoint {
    pub prob: f64,
    pub x: Vec<f64>,
    pub p_y1: f64,
}

/// A data-generating distribution that can be sampled repeatedly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// x ∈ {-1, 0, 1} with P(x = ±1) = λ, y = I[x ≠ 0]; features (x, 1).
    MisspecifiedLogistic { lambda: f64 },
    /// z uniform on {1/K, …, K/K}, x_j = I[z = (K+1-j)/K], y = I[z = 1].
    IndicatorGrid { k: usize },
    /// Uniform features on [-1, 1]^K, y = I[xᵀβ > 0] flipped with prob `noise`.
    SparseLinear { beta: Vec<f64>, noise: f64 },
}

impl GeneratorSpec {
    pub fn misspecified_logistic(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 0.25) {
            return Err(Error::InvalidGenerator(format!("lambda = {lambda} must lie in (0, 0.25)")));
        }
        Ok(Self::MisspecifiedLogistic { lambda })
    }

    pub fn indicator_grid(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidGenerator(format!("indicator grid needs K >= 2, got {k}")));
        }
        Ok(Self::IndicatorGrid { k })
    }

    pub fn sparse_linear(beta: Vec<f64>, noise: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&noise) {
            return Err(Error::InvalidGenerator(format!("noise = {noise} must lie in [0, 0.5)")));
        }
        if beta.is_empty() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidGenerator("sparse-linear truth must be a finite nonempty vector".into()));
        }
        Ok(Self::SparseLinear { beta, noise })
    }

    pub fn k(&self) -> usize {
        match self {
            Self::MisspecifiedLogistic { .. } => 2,
            Self::IndicatorGrid { k } => *k,
            Self::SparseLinear { beta, .. } => beta.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MisspecifiedLogistic { .. } => "misspecified-logistic",
            Self::IndicatorGrid { .. } => "indicator-grid",
            Self::SparseLinear { .. } => "sparse-linear",
        }
    }

    /// Whether the anchor feature has a bounded conditional density.
    pub fn anchor_density_bounded(&self) -> bool {
        matches!(self, Self::SparseLinear { .. })
    }

    /// Append one observation to `row`, returning its label.
    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, row: &mut Vec<f64>) -> u8 {
        row.clear();
        match self {
            Self::MisspecifiedLogistic { lambda } => {
                let u: f64 = rng.random();
                let x = if u < *lambda {
                    -1.0
                } else if u < 2.0 * lambda {
                    1.0
                } else {
                    0.0
                };
                row.extend([x, 1.0]);
                (x != 0.0) as u8
            }
            Self::IndicatorGrid { k } => {
                // z = level / K with level uniform on 1..=K; the hot column is K - level.
                let level = rng.random_range(1..=*k);
                row.resize(*k, 0.0);
                row[*k - level] = 1.0;
                (level == *k) as u8
            }
            Self::SparseLinear { beta, noise } => {
                row.extend((0..beta.len()).map(|_| rng.random_range(-1.0..=1.0)));
                let m: f64 = row.iter().zip(beta).map(|(x, b)| x * b).sum();
                let clean = m > 0.0;
                let flip = *noise > 0.0 && rng.random::<f64>() < *noise;
                (clean ^ flip) as u8
            }
        }
    }

    /// Draw `n` observations from `rng`.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        let k = self.k();
        let mut labels = Vec::with_capacity(n);
        let mut columns = vec![0.0; n * k];
        let mut row = Vec::with_capacity(k);
        for i in 0..n {
            labels.push(self.draw_into(rng, &mut row));
            for (j, &x) in row.iter().enumerate() {
                columns[j * n + i] = x;
            }
        }
        Ok(Dataset::from_columns(labels, columns, k, self.name())?
            .with_anchor_density(Some(self.anchor_density_bounded())))
    }

    /// Draw `n` observations from the given seed and stream.
    pub fn sample(&self, n: usize, seed: u64, stream: u64) -> Result<Dataset> {
        self.sample_with(n, &mut stream_rng(seed, stream))
    }

    /// Visit `m` fresh draws one at a time without materializing a dataset.
    pub fn for_each_draw<R: Rng + ?Sized>(&self, m: usize, rng: &mut R, mut f: impl FnMut(&[f64], u8)) {
        let mut row = Vec::with_capacity(self.k());
        for _ in 0..m {
            let y = self.draw_into(rng, &mut row);
            f(&row, y);
        }
    }

    /// The full support when the feature distribution is finite.
    pub fn finite_support(&self) -> Option<Vec<SupportPoint>> {
        match self {
            Self::MisspecifiedLogistic { lambda } => Some(vec![
                SupportPoint { prob: *lambda, x: vec![-1.0, 1.0], p_y1: 1.0 },
                SupportPoint { prob: 1.0 - 2.0 * lambda, x: vec![0.0, 1.0], p_y1: 0.0 },
                SupportPoint { prob: *lambda, x: vec![1.0, 1.0], p_y1: 1.0 },
            ]),
            Self::IndicatorGrid { k } => Some(
                (0..*k)
                    .map(|c| {
                        let mut x = vec![0.0; *k];
                        x[c] = 1.0;
                        SupportPoint { prob: 1.0 / *k as f64, x, p_y1: (c == ANCHOR) as u8 as f64 }
                    })
                    .collect(),
            ),
            Self::SparseLinear { .. } => None,
        }
    }
}

pub fn gen_misspecified_logistic(lambda: f64, n: usize, seed: u64) -> Result<Dataset> {
    GeneratorSpec::misspecified_logistic(lambda)?.sample(n, seed, DATA_STREAM)
}

pub fn gen_indicator_grid(k: usize, n: usize, seed: u64) -> Result<Dataset> {
    GeneratorSpec::indicator_grid(k)?.sample(n, seed, DATA_STREAM)
}

/// Draw a sparse truth: β₁ = +1 plus `support` coefficients of magnitude
/// `coef_scale` with random signs at random positions.
pub fn sparse_truth(k: usize, support: usize, coef_scale: f64, seed: u64) -> Result<Vec<f64>> {
    if support >= k {
        return Err(Error::InvalidGenerator(format!("support {support} must be smaller than K = {k}")));
    }
    if !(coef_scale > 0.0 && coef_scale.is_finite()) {
        return Err(Error::InvalidGenerator(format!("coefficient scale must be positive, got {coef_scale}")));
    }
    let mut rng = stream_rng(seed, TRUTH_STREAM);
    let mut beta = vec![0.0; k];
    beta[ANCHOR] = 1.0;
    let mut picks: Vec<usize> = sample_indices(&mut rng, k - 1, support).into_iter().map(|i| i + 1).collect();
    picks.sort_unstable();
    for j in picks {
        beta[j] = if rng.random::<bool>() { coef_scale } else { -coef_scale };
    }
    Ok(beta)
}

pub fn gen_sparse_linear(
    k: usize,
    n: usize,
    support: usize,
    coef_scale: f64,
    noise: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    let beta = sparse_truth(k, support, coef_scale, seed)?;
    let spec = GeneratorSpec::sparse_linear(beta.clone(), noise)?;
    Ok((spec.sample(n, seed, DATA_STREAM)?, beta))
}

/// Read a CSV with a header row, map every feature column affinely onto
/// [-1, 1] by its min/max (constant columns become 0) and move `anchor`
/// (default: the first non-label column) to position 0.
pub fn ingest_csv(path: impl AsRef<Path>, label_column: &str, anchor: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::InvalidDataset(format!("label column '{label_column}' not found")))?;
    let mut feature_idx: Vec<usize> = (0..headers.len()).filter(|&c| c != label_idx).collect();
    if feature_idx.is_empty() {
        return Err(Error::InvalidDataset("no feature columns".into()));
    }
    if let Some(name) = anchor {
        let pos = feature_idx
            .iter()
            .position(|&c| headers[c] == name)
            .ok_or_else(|| Error::InvalidDataset(format!("anchor column '{name}' not found")))?;
        let a = feature_idx.remove(pos);
        feature_idx.insert(0, a);
    }

    let mut labels = Vec::new();
    let mut raw: Vec<Vec<f64>> = vec![Vec::new(); feature_idx.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |c: usize| record.get(c).map(str::trim).unwrap_or("");
        let y = match cell(label_idx).parse::<f64>() {
            Ok(0.0) => 0,
            Ok(1.0) => 1,
            _ => {
                return Err(Error::InvalidDataset(format!(
                    "row {}: label '{}' is not 0 or 1",
                    line + 1,
                    cell(label_idx)
                )))
            }
        };
        labels.push(y);
        for (slot, &c) in raw.iter_mut().zip(&feature_idx) {
            let v: f64 = cell(c).parse().map_err(|_| {
                Error::InvalidDataset(format!(
                    "row {}: column '{}' value '{}' is not numeric",
                    line + 1,
                    headers[c],
                    cell(c)
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidDataset(format!("row {}: column '{}' is not finite", line + 1, headers[c])));
            }
            slot.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::InvalidDataset(format!("{} has no data rows", path.display())));
    }

    let mut maps = BTreeMap::new();
    let mut columns = Vec::with_capacity(labels.len() * raw.len());
    let mut names = Vec::new();
    for (col, &c) in raw.iter().zip(&feature_idx) {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        columns
            .extend(col.iter().map(|&v| if span > 0.0 { (2.0 * (v - lo) / span - 1.0).clamp(-1.0, 1.0) } else { 0.0 }));
        maps.insert(headers[c].clone(), (lo, hi));
        names.push(format!("{}[{},{}]", headers[c], lo, hi));
    }
    let provenance = format!("file:{}; label={}; columns={}", path.display(), label_column, names.join(","));
    Dataset::from_columns(labels, columns, feature_idx.len(), provenance)
}
