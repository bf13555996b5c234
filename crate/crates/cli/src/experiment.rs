//! One configured run: data, temperature selection, chain, evaluation and
//! the four output files.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use gibbs_bvs::conditions::{validate_conditions, ConditionReport};
use gibbs_bvs::generators::{ingest_csv, sparse_truth, GeneratorSpec};
use gibbs_bvs::oracle::{
    best_sparse_rule, exact_grid_posterior, logistic_mle_baseline, variational_check, GridRisk, GridSpec, Objective,
    SparseSearch,
};
use gibbs_bvs::risk::{empirical_risk_unsmoothed, population_risk_analytic, DecisionRule};
use gibbs_bvs::rng::{stream_rng, AUX_STREAM, DATA_STREAM, HOLDOUT_STREAM, VALIDATION_STREAM};
use gibbs_bvs::sampler::{self, Backend, ChainOutput, Draw, SamplerConfig};
use gibbs_bvs::types::{default_delta, default_sigma, Dataset, PriorSpec, RiskSpec};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, GeneratorConfig, PoolConfig, PoolName};
use crate::error::{CliError, Result};

/// Artifact version stamped into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Holdout size used when a generator has no analytic risk and none is configured.
pub const DEFAULT_HOLDOUT: usize = 20_000;

/// Retained draws scored against a holdout sample unless configured.
pub const DEFAULT_HOLDOUT_EVAL_DRAWS: usize = 500;

pub const FILES: [&str; 4] = ["config.json", "conditions.json", "trace.csv", "summary.json"];

/// Everything a run needs, resolved from the config.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: Dataset,
    pub generator: Option<GeneratorSpec>,
    /// Generating coefficients when the generator has them.
    pub truth: Option<Vec<f64>>,
    pub holdout: Option<Dataset>,
    /// Fresh validation draws for temperature selection (generators only).
    pub validation: Option<Dataset>,
    pub analytic: bool,
    /// Risk at the configured ψ.
    pub risk: RiskSpec,
    pub prior: PriorSpec,
    pub delta_n: f64,
    pub sampler: SamplerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiScore {
    pub psi: f64,
    pub validation_risk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOracleSummary {
    pub tv_distance: f64,
    pub cells: usize,
    pub variational_min_gap: f64,
    pub variational_passed: bool,
}

/// Contents of summary.json.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub data: String,
    pub n: usize,
    pub k: usize,
    pub psi: f64,
    pub sigma_n: f64,
    pub lambda: f64,
    pub rbar: usize,
    pub v: f64,
    pub delta_n: f64,
    pub psi_selection: Vec<PsiScore>,
    /// "analytic" or "holdout": which estimate `gibbs_risk` reports.
    pub risk_kind: String,
    /// Posterior mean of the rule risk over the scored draws.
    pub gibbs_risk: f64,
    pub gibbs_risk_analytic: Option<f64>,
    pub gibbs_risk_holdout: Option<f64>,
    pub evaluated_draws: usize,
    pub posterior_mean_smoothed_risk: f64,
    pub mean_model_size: f64,
    pub max_model_size: usize,
    pub acceptance_rate: f64,
    pub retained_draws: usize,
    pub inclusion_frequencies: Vec<f64>,
    pub mle_risk: Option<f64>,
    pub mle_converged: Option<bool>,
    pub best_sparse_risk: Option<f64>,
    pub best_sparse_beta: Option<Vec<f64>>,
    pub truth_risk: Option<f64>,
    pub grid_oracle: Option<GridOracleSummary>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub summary: RunSummary,
    pub conditions: ConditionReport,
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(cfg.canonical_json()?.as_bytes())))
}

fn build_generator(g: &GeneratorConfig, seed: u64) -> Result<(GeneratorSpec, Option<Vec<f64>>)> {
    Ok(match g {
        GeneratorConfig::MisspecifiedLogistic { lambda, .. } => (GeneratorSpec::misspecified_logistic(*lambda)?, None),
        GeneratorConfig::IndicatorGrid { k, .. } => (GeneratorSpec::indicator_grid(*k)?, None),
        GeneratorConfig::SparseLinear { k, support, coef_scale, noise, .. } => {
            let beta = sparse_truth(*k, *support, *coef_scale, seed)?;
            (GeneratorSpec::sparse_linear(beta.clone(), *noise)?, Some(beta))
        }
    })
}

/// Deterministic row split: returns (kept, split_off) with `fraction` of
/// the rows in the second part.
fn split_rows(data: &Dataset, fraction: f64, seed: u64, stream: u64) -> Result<(Dataset, Dataset)> {
    let n = data.n();
    let cut = (fraction * n as f64).round() as usize;
    if cut == 0 || n - cut < 2 {
        return Err(CliError::Config(format!("cannot split {n} rows with fraction {fraction}")));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut stream_rng(seed, stream));
    let (off, kept) = rows.split_at(cut);
    let (mut off, mut kept) = (off.to_vec(), kept.to_vec());
    off.sort_unstable();
    kept.sort_unstable();
    Ok((data.subset(&kept)?, data.subset(&off)?))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let ev = &cfg.evaluation;
    let (train, generator, truth, holdout, validation, analytic) = match (&cfg.generator, &cfg.input) {
        (Some(g), None) => {
            let (spec, truth) = build_generator(g, cfg.seed)?;
            let train = spec.sample(g.n(), cfg.seed, DATA_STREAM)?;
            let finite = spec.finite_support().is_some();
            let analytic = ev.analytic.unwrap_or(finite);
            if analytic && !finite {
                return Err(CliError::Config(format!("{} has no analytic risk; set a holdout size", spec.name())));
            }
            let m = ev.holdout.unwrap_or(if analytic { 0 } else { DEFAULT_HOLDOUT });
            if m == 0 && !analytic {
                return Err(CliError::Config("no risk estimate: enable analytic risk or set a holdout size".into()));
            }
            let holdout = if m > 0 { Some(spec.sample(m, cfg.seed, HOLDOUT_STREAM)?) } else { None };
            let validation = match &cfg.risk.psi_grid {
                Some(_) => Some(spec.sample(ev.validation, cfg.seed, VALIDATION_STREAM)?),
                None => None,
            };
            (train, Some(spec), truth, holdout, validation, analytic)
        }
        (None, Some(input)) => {
            let all = ingest_csv(&input.path, &input.label_column, input.anchor.as_deref())?;
            let (train, holdout) = split_rows(&all, ev.holdout_fraction, cfg.seed, HOLDOUT_STREAM)?;
            (train, None, None, Some(holdout), None, false)
        }
        _ => unreachable!("validate() enforces exactly one data source"),
    };

    let n = train.n();
    let k = train.k();
    let sigma = cfg.risk.sigma.value().unwrap_or_else(|| default_sigma(n));
    let risk = RiskSpec::new(cfg.risk.rho, cfg.risk.psi, sigma)?;
    let delta_n = cfg.prior.delta.value().unwrap_or_else(|| default_delta(n));
    let auto = PriorSpec::auto(n, k, cfg.prior.v, delta_n, cfg.prior.m)?;
    let prior = match (cfg.prior.lambda.value(), cfg.prior.rbar.value()) {
        (None, None) => auto,
        (Some(lambda), None) => PriorSpec::new(lambda, auto.rbar, cfg.prior.v, k)?,
        (None, Some(rbar)) => PriorSpec::new((rbar as f64 / (2.0 * k as f64)).min(1.0), rbar, cfg.prior.v, k)?,
        (Some(lambda), Some(rbar)) => PriorSpec::new(lambda, rbar, cfg.prior.v, k)?,
    };
    Ok(Prepared {
        train,
        generator,
        truth,
        holdout,
        validation,
        analytic,
        risk,
        prior,
        delta_n,
        sampler: cfg.sampler.to_sampler(cfg.seed),
    })
}

/// Evenly spaced retained draws, at most `limit` of them.
pub fn scored_draws(draws: &[Draw], limit: Option<usize>) -> Vec<&Draw> {
    let step = match limit {
        Some(m) if m < draws.len() => draws.len().div_ceil(m),
        _ => 1,
    };
    draws.iter().step_by(step).collect()
}

fn mean(xs: impl Iterator<Item = Result<f64>>) -> Result<f64> {
    let (mut s, mut c) = (0.0, 0usize);
    for x in xs {
        s += x?;
        c += 1;
    }
    Ok(s / c.max(1) as f64)
}

/// Posterior mean of the holdout risk of sampled rules.
pub fn posterior_holdout_risk(draws: &[&Draw], data: &Dataset, risk: &RiskSpec) -> Result<f64> {
    let k = data.k();
    mean(draws.iter().map(|d| Ok(empirical_risk_unsmoothed(&d.rule(k), data, risk)?)))
}

/// Posterior mean of the exact population risk of sampled rules.
pub fn posterior_analytic_risk(draws: &[&Draw], generator: &GeneratorSpec, risk: &RiskSpec) -> Result<f64> {
    let k = generator.k();
    mean(draws.iter().map(|d| Ok(population_risk_analytic(&d.rule(k), generator, risk)?)))
}

fn holdout_limit(cfg: &ExperimentConfig) -> Option<usize> {
    Some(cfg.evaluation.eval_draws.unwrap_or(DEFAULT_HOLDOUT_EVAL_DRAWS))
}

/// Run one chain per ψ on the grid and keep the one with the smallest
/// validation risk (the first on ties). Generators score on fresh validation
/// draws; input data holds out part of the training rows and reruns the
/// chosen ψ on all of them.
fn select_psi(cfg: &ExperimentConfig, p: &Prepared, grid: &[f64]) -> Result<(f64, Vec<PsiScore>, Option<ChainOutput>)> {
    let (fit_on, score_on) = match &p.validation {
        Some(v) => (p.train.clone(), v.clone()),
        None => split_rows(&p.train, cfg.evaluation.validation_fraction, cfg.seed, VALIDATION_STREAM)?,
    };
    let limit = holdout_limit(cfg);
    let runs: Vec<Result<(PsiScore, ChainOutput)>> = grid
        .par_iter()
        .map(|&psi| {
            let risk = p.risk.with_psi(psi)?;
            let out = sampler::run(&fit_on, &risk, &p.prior, &p.sampler)?;
            let score = posterior_holdout_risk(&scored_draws(&out.draws, limit), &score_on, &risk)?;
            Ok((PsiScore { psi, validation_risk: score }, out))
        })
        .collect();
    let mut scores = Vec::with_capacity(grid.len());
    let mut outputs = Vec::with_capacity(grid.len());
    for r in runs {
        let (s, o) = r?;
        scores.push(s);
        outputs.push(o);
    }
    let best = (0..scores.len())
        .min_by(|&a, &b| scores[a].validation_risk.total_cmp(&scores[b].validation_risk).then(a.cmp(&b)))
        .expect("grid is nonempty");
    let chain = if p.validation.is_some() { Some(outputs.swap_remove(best)) } else { None };
    Ok((scores[best].psi, scores, chain))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn stamp(seed: u64, hash: &str) -> serde_json::Value {
    json!({ "seed": seed, "config_hash": hash, "version": VERSION })
}

fn with_stamp(seed: u64, hash: &str, key: &str, body: serde_json::Value) -> serde_json::Value {
    let mut v = stamp(seed, hash);
    v[key] = body;
    v
}

/// Run the configured experiment and write config.json, conditions.json,
/// trace.csv and summary.json into `out_dir`. Outputs depend only on the
/// config (seed included), so reruns are byte-identical.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    let hash = config_hash(cfg)?;
    let p = prepare(cfg)?;
    fs::create_dir_all(out_dir)?;

    let (psi, psi_selection, reuse) = match &cfg.risk.psi_grid {
        Some(grid) => select_psi(cfg, &p, grid)?,
        None => (p.risk.psi, Vec::new(), None),
    };
    let risk = p.risk.with_psi(psi)?;

    let resolved = json!({
        "n": p.train.n(),
        "k": p.train.k(),
        "psi": psi,
        "sigma_n": risk.sigma_n,
        "delta_n": p.delta_n,
        "risk": risk,
        "prior": p.prior,
        "sampler": p.sampler,
        "analytic": p.analytic,
        "holdout": p.holdout.as_ref().map(Dataset::n),
    });
    write_json(
        &out_dir.join("config.json"),
        &json!({ "seed": cfg.seed, "config_hash": hash, "version": VERSION, "config": cfg, "resolved": resolved }),
    )?;

    let conditions = validate_conditions(&p.train, &p.prior, &risk, p.delta_n);
    write_json(&out_dir.join("conditions.json"), &with_stamp(cfg.seed, &hash, "report", conditions.to_json()))?;
    if conditions.has_hard_failure() {
        let msgs: Vec<String> = conditions.failures().iter().map(|c| format!("{}: {}", c.name, c.message)).collect();
        return Err(CliError::Config(format!("hard condition failure: {}", msgs.join("; "))));
    }

    let chain = match reuse {
        Some(c) => c,
        None => sampler::run(&p.train, &risk, &p.prior, &p.sampler)?,
    };
    let preamble = [format!("seed={}", cfg.seed), format!("config_hash={hash}"), format!("version={VERSION}")];
    chain.write_trace_csv(BufWriter::new(fs::File::create(out_dir.join("trace.csv"))?), &preamble)?;

    let summary = summarize(cfg, &p, &risk, psi, psi_selection, &chain, &hash)?;
    write_json(&out_dir.join("summary.json"), &serde_json::to_value(&summary)?)?;
    Ok(RunReport { out_dir: out_dir.to_path_buf(), summary, conditions })
}

fn summarize(
    cfg: &ExperimentConfig,
    p: &Prepared,
    risk: &RiskSpec,
    psi: f64,
    psi_selection: Vec<PsiScore>,
    chain: &ChainOutput,
    hash: &str,
) -> Result<RunSummary> {
    let ev = &cfg.evaluation;
    let analytic_draws = scored_draws(&chain.draws, ev.eval_draws);
    let holdout_draws = scored_draws(&chain.draws, holdout_limit(cfg));
    let generator = p.generator.as_ref();

    let gibbs_risk_analytic = match (p.analytic, generator) {
        (true, Some(g)) => Some(posterior_analytic_risk(&analytic_draws, g, risk)?),
        _ => None,
    };
    let gibbs_risk_holdout = match &p.holdout {
        Some(h) => Some(posterior_holdout_risk(&holdout_draws, h, risk)?),
        None => None,
    };
    let (risk_kind, gibbs_risk, evaluated_draws) = match (gibbs_risk_analytic, gibbs_risk_holdout) {
        (Some(a), _) => ("analytic", a, analytic_draws.len()),
        (None, Some(h)) => ("holdout", h, holdout_draws.len()),
        (None, None) => unreachable!("prepare() guarantees one risk estimate"),
    };

    // Risk of a single rule on the same footing as `gibbs_risk`.
    let rule_risk = |rule: &DecisionRule| -> Result<f64> {
        match (p.analytic, generator, &p.holdout) {
            (true, Some(g), _) => Ok(population_risk_analytic(rule, g, risk)?),
            (_, _, Some(h)) => Ok(empirical_risk_unsmoothed(rule, h, risk)?),
            _ => unreachable!("prepare() guarantees one risk estimate"),
        }
    };

    let (mle_risk, mle_converged) = if ev.baseline {
        let fit = logistic_mle_baseline(&p.train)?;
        (Some(rule_risk(&fit.classifier())?), Some(fit.converged))
    } else {
        (None, None)
    };

    let (best_sparse_risk, best_sparse_beta) = match &ev.best_sparse {
        Some(b) => {
            let mut search = SparseSearch::grid(b.budget, b.half_width, b.points);
            match &b.pool {
                PoolConfig::Named(PoolName::All) => {}
                PoolConfig::Named(PoolName::Truth) => {
                    let truth = p.truth.as_ref().expect("validated: sparse-linear generator");
                    search = search.with_pool((1..truth.len()).filter(|&j| truth[j] != 0.0).collect());
                }
                PoolConfig::Explicit(pool) => search = search.with_pool(pool.clone()),
            }
            let objective = match (p.analytic, generator, &p.holdout) {
                (true, Some(g), _) => Objective::Analytic(g),
                (_, _, Some(h)) => Objective::Empirical(h),
                _ => unreachable!("prepare() guarantees one risk estimate"),
            };
            let best = best_sparse_rule(objective, risk, &search)?;
            (Some(best.risk), Some(best.rule.beta().to_vec()))
        }
        None => (None, None),
    };

    let truth_risk = match &p.truth {
        Some(beta) => Some(rule_risk(&DecisionRule::from_beta(beta.clone())?)?),
        None => None,
    };

    let grid_oracle = match &ev.grid_oracle {
        Some(g) => {
            let kind = match p.sampler.backend {
                Backend::Gibbs => GridRisk::Smoothed,
                Backend::Metropolis => GridRisk::Unsmoothed,
            };
            let spec = GridSpec::new(g.half_width, g.points).with_subcells(g.subcells);
            let grid = exact_grid_posterior(&p.train, risk, &p.prior, spec, kind)?;
            let var = variational_check(&grid, 200, &mut stream_rng(cfg.seed, AUX_STREAM));
            Some(GridOracleSummary {
                tv_distance: grid.tv_to_draws(&chain.draws),
                cells: grid.points.len(),
                variational_min_gap: var.min_gap,
                variational_passed: var.passed,
            })
        }
        None => None,
    };

    let s = chain.summary();
    Ok(RunSummary {
        seed: cfg.seed,
        config_hash: hash.to_string(),
        version: VERSION.to_string(),
        data: p.train.provenance.clone(),
        n: p.train.n(),
        k: p.train.k(),
        psi,
        sigma_n: risk.sigma_n,
        lambda: p.prior.lambda,
        rbar: p.prior.rbar,
        v: p.prior.v,
        delta_n: p.delta_n,
        psi_selection,
        risk_kind: risk_kind.to_string(),
        gibbs_risk,
        gibbs_risk_analytic,
        gibbs_risk_holdout,
        evaluated_draws,
        posterior_mean_smoothed_risk: s.posterior_mean_smoothed_risk,
        mean_model_size: s.mean_model_size,
        max_model_size: s.max_model_size,
        acceptance_rate: s.acceptance_rate,
        retained_draws: s.retained_draws,
        inclusion_frequencies: s.inclusion_frequencies,
        mle_risk,
        mle_converged,
        best_sparse_risk,
        best_sparse_beta,
        truth_risk,
        grid_oracle,
    })
}
