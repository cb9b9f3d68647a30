//! Monte Carlo harness over metamodel populations.
//!
//! Each replication draws a population, regresses column 0 on columns
//! `1..=k` and records the predictor coefficient `β₁` with its standard
//! error `σ₁`. Replications are independent work units keyed by index, run
//! on the rayon pool, and reduced in index order, so summaries do not depend
//! on the number of worker threads.
//!
//! Regressions here omit the intercept by default. That matches how the
//! empirical scaling laws
//!
//! ```text
//! β̂₁(p, k)    ≈ 3b² / k
//! σ̂₁(p, k, N) ≈ N^(−1/2) (4 + 12 b⁵) (k − (1 + b)/4) / k
//! ```
//!
//! were calibrated; with an intercept the metamodel coefficients come out
//! several times larger. [`EnsembleOptions::intercept`] switches it on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{fit_logistic, normal_interval, relative_risk, DesignMatrix, FitOptions};
use crate::metamodel::{draw_realization, p_for_correlation, ModelParams, ResponseMatrix};

/// Default replication count of the calibration protocol.
pub const DEFAULT_REPLICATIONS: usize = 500;
/// Population size of the calibration protocol.
pub const DEFAULT_RESPONDENTS: usize = 10_000;
/// Population size that grid confidence intervals are rescaled to.
pub const DEFAULT_CI_POPULATION: usize = 50_000;

/// `3(2p − 1)² / k`. Accepts the boundary `p = 0.5`.
pub fn empirical_beta_formula(p: f64, k: usize) -> Result<f64> {
    let b = formula_bias(p, k)?;
    Ok(3.0 * b * b / k as f64)
}

/// `N^(−1/2) (4 + 12b⁵) (k − (1 + b)/4) / k`. Accepts the boundary `p = 0.5`.
pub fn empirical_sigma_formula(p: f64, k: usize, n: usize) -> Result<f64> {
    let b = formula_bias(p, k)?;
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let k = k as f64;
    Ok((4.0 + 12.0 * b.powi(5)) * ((k - (1.0 + b) / 4.0) / k) / (n as f64).sqrt())
}

fn formula_bias(p: f64, k: usize) -> Result<f64> {
    if !(0.5..1.0).contains(&p) {
        return Err(Error::invalid(format!("p = {p} outside [0.5, 1)")));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(2.0 * p - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub intercept: bool,
    pub fit: FitOptions,
    pub keep_per_replication: bool,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            intercept: false,
            fit: FitOptions::default(),
            keep_per_replication: false,
        }
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitDigest {
    pub replication: u64,
    pub beta1: f64,
    pub sigma1: f64,
    pub converged: bool,
    pub separation_detected: bool,
    pub iterations: usize,
    pub dependent_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub params: ModelParams,
    pub replications: usize,
    /// Replications excluded because the fit failed or did not converge.
    pub excluded: usize,
    pub mean_beta1: f64,
    pub mean_sigma1: f64,
    /// Standard error of `mean_beta1` across replications. With a single
    /// usable replication this falls back to that fit's own `σ₁`.
    pub mc_error_beta1: f64,
    pub mean_dependent: f64,
    pub per_replication: Option<Vec<FitDigest>>,
}

impl EnsembleSummary {
    pub fn used(&self) -> usize {
        self.replications - self.excluded
    }
}

/// Regresses column 0 of `m` on columns `1..=k`.
///
/// With no causal increment every regressor is an equivalent predictor, so
/// `β₁` and `σ₁` are averaged over all `k` regressor coefficients; otherwise
/// column 1 alone plays the predictor.
pub fn fit_matrix(m: &ResponseMatrix, opts: &EnsembleOptions) -> Result<(f64, f64, crate::glm::FitResult)> {
    let k = m.n_cols() - 1;
    let y = m.column(0);
    let columns = (1..=k).map(|j| (format!("R{j}"), m.column(j))).collect();
    let design = DesignMatrix::from_columns(columns, opts.intercept)?;
    let fit = fit_logistic(&y, &design, &opts.fit)?;
    let offset = usize::from(opts.intercept);
    let (beta1, sigma1) = if m.params().causal_increment == 0.0 {
        let b = fit.coefficients[offset..].iter().sum::<f64>() / k as f64;
        let s = fit.std_errors[offset..].iter().sum::<f64>() / k as f64;
        (b, s)
    } else {
        (fit.coefficients[offset], fit.std_errors[offset])
    };
    Ok((beta1, sigma1, fit))
}

fn run_replication(params: &ModelParams, replication: u64, opts: &EnsembleOptions) -> FitDigest {
    let failed = |dependent_mean| FitDigest {
        replication,
        beta1: f64::NAN,
        sigma1: f64::NAN,
        converged: false,
        separation_detected: false,
        iterations: 0,
        dependent_mean,
    };
    let m = match draw_realization(params, replication) {
        Ok(m) => m,
        Err(_) => return failed(f64::NAN),
    };
    let dependent_mean = m.column_mean(0);
    match fit_matrix(&m, opts) {
        Ok((beta1, sigma1, fit)) => FitDigest {
            replication,
            beta1,
            sigma1,
            converged: fit.converged,
            separation_detected: fit.separation_detected,
            iterations: fit.iterations,
            dependent_mean,
        },
        // Degenerate draws (an all-zero or collinear column at tiny N) are
        // excluded like non-converged fits.
        Err(_) => failed(dependent_mean),
    }
}

pub fn run_ensemble(params: &ModelParams, replications: usize) -> Result<EnsembleSummary> {
    run_ensemble_with(params, replications, &EnsembleOptions::default())
}

pub fn run_ensemble_with(
    params: &ModelParams,
    replications: usize,
    opts: &EnsembleOptions,
) -> Result<EnsembleSummary> {
    params.validate()?;
    if replications == 0 {
        return Err(Error::invalid("replications must be at least 1"));
    }
    let digests: Vec<FitDigest> = (0..replications as u64)
        .into_par_iter()
        .map(|r| run_replication(params, r, opts))
        .collect();

    let used: Vec<&FitDigest> = digests.iter().filter(|d| d.converged).collect();
    if used.is_empty() {
        return Err(Error::AllReplicationsFailed(replications));
    }
    let n = used.len() as f64;
    let mean_beta1 = used.iter().map(|d| d.beta1).sum::<f64>() / n;
    let mean_sigma1 = used.iter().map(|d| d.sigma1).sum::<f64>() / n;
    let mean_dependent = used.iter().map(|d| d.dependent_mean).sum::<f64>() / n;
    let mc_error_beta1 = if used.len() > 1 {
        let var = used
            .iter()
            .map(|d| (d.beta1 - mean_beta1).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    } else {
        mean_sigma1
    };
    Ok(EnsembleSummary {
        params: *params,
        replications,
        excluded: replications - used.len(),
        mean_beta1,
        mean_sigma1,
        mc_error_beta1,
        mean_dependent,
        per_replication: opts.keep_per_replication.then_some(digests),
    })
}

/// Prevalence used to turn a logit coefficient into a relative risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// A fixed prevalence; `0` gives `exp(β₁) − 1`, the rare-outcome limit.
    Fixed(f64),
    /// The simulated mean of the dependent column.
    DependentMean,
}

impl Default for Baseline {
    fn default() -> Self {
        Baseline::Fixed(0.0)
    }
}

/// A sweep over pairwise correlations `r` and confounder counts `n`.
/// Each cell simulates `k = n + 1` regressors (predictor plus `n` confounders).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub correlations: Vec<f64>,
    pub confounder_counts: Vec<usize>,
    pub n_respondents: usize,
    pub replications: usize,
    pub causal_increment: f64,
    pub seed: u64,
    pub baseline: Baseline,
    /// Population size the reported intervals are rescaled to (`σ ∝ N^(−1/2)`).
    pub ci_population: usize,
    pub level: f64,
    pub intercept: bool,
}

impl GridSpec {
    pub fn new(correlations: Vec<f64>, confounder_counts: Vec<usize>, seed: u64) -> Self {
        GridSpec {
            correlations,
            confounder_counts,
            n_respondents: DEFAULT_RESPONDENTS,
            replications: DEFAULT_REPLICATIONS,
            causal_increment: 0.0,
            seed,
            baseline: Baseline::default(),
            ci_population: DEFAULT_CI_POPULATION,
            level: 0.95,
            intercept: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.correlations.is_empty() || self.confounder_counts.is_empty() {
            return Err(Error::invalid("grid needs at least one r and one n"));
        }
        if let Some(r) = self.correlations.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::invalid(format!("correlation {r} outside (0, 1)")));
        }
        if self.confounder_counts.contains(&0) {
            return Err(Error::invalid("confounder counts must be at least 1"));
        }
        if self.n_respondents == 0 || self.replications == 0 || self.ci_population == 0 {
            return Err(Error::invalid("N, replications and CI population must be positive"));
        }
        if !self.causal_increment.is_finite() {
            return Err(Error::invalid("causal increment must be finite"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid(format!("level {} outside (0, 1)", self.level)));
        }
        if let Baseline::Fixed(b) = self.baseline {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("baseline prevalence {b} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// One `(r, n)` cell of a grid scan. Numeric fields are empty when the cell
/// failed; `status` then carries the error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub r: f64,
    pub n_confounders: usize,
    #[serde(rename = "N")]
    pub n_respondents: usize,
    pub replications: usize,
    pub mean_beta1: Option<f64>,
    pub mean_sigma1: Option<f64>,
    pub relative_risk: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub excluded: usize,
    pub k: usize,
    pub p: f64,
    pub causal_increment: f64,
    pub mc_error_beta1: Option<f64>,
    pub formula_beta1: f64,
    pub formula_sigma1: f64,
    pub baseline_prevalence: Option<f64>,
    pub ci_population: usize,
    pub status: String,
}

impl GridRow {
    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

fn scan_cell(spec: &GridSpec, r: f64, n: usize) -> Result<GridRow> {
    let p = p_for_correlation(r)?;
    let k = n + 1;
    let params = ModelParams::new(p, k, spec.n_respondents, spec.seed)?
        .with_causal_increment(spec.causal_increment)?;
    let mut row = GridRow {
        r,
        n_confounders: n,
        n_respondents: spec.n_respondents,
        replications: spec.replications,
        mean_beta1: None,
        mean_sigma1: None,
        relative_risk: None,
        ci_low: None,
        ci_high: None,
        excluded: spec.replications,
        k,
        p,
        causal_increment: spec.causal_increment,
        mc_error_beta1: None,
        formula_beta1: empirical_beta_formula(p, k)?,
        formula_sigma1: empirical_sigma_formula(p, k, spec.n_respondents)?,
        baseline_prevalence: None,
        ci_population: spec.ci_population,
        status: String::new(),
    };
    let opts = EnsembleOptions {
        intercept: spec.intercept,
        ..EnsembleOptions::default()
    };
    let summary = match run_ensemble_with(&params, spec.replications, &opts) {
        Ok(s) => s,
        Err(e) => {
            row.status = e.to_string();
            return Ok(row);
        }
    };
    let baseline = match spec.baseline {
        Baseline::Fixed(b) => b,
        Baseline::DependentMean => summary.mean_dependent,
    };
    let sigma_ci =
        summary.mean_sigma1 * (spec.n_respondents as f64 / spec.ci_population as f64).sqrt();
    let (lo, hi) = normal_interval(summary.mean_beta1, sigma_ci, spec.level)?;
    row.mean_beta1 = Some(summary.mean_beta1);
    row.mean_sigma1 = Some(summary.mean_sigma1);
    row.mc_error_beta1 = Some(summary.mc_error_beta1);
    row.excluded = summary.excluded;
    row.baseline_prevalence = Some(baseline);
    row.relative_risk = Some(relative_risk(summary.mean_beta1, baseline)?);
    row.ci_low = Some(relative_risk(lo, baseline)?);
    row.ci_high = Some(relative_risk(hi, baseline)?);
    row.status = "ok".into();
    Ok(row)
}

/// Runs every `(r, n)` cell, `r` outermost. A failing cell is reported in
/// its row's `status` and the remaining cells still run.
pub fn scan_grid(spec: &GridSpec) -> Result<Vec<GridRow>> {
    spec.validate()?;
    let cells: Vec<(f64, usize)> = spec
        .correlations
        .iter()
        .flat_map(|&r| spec.confounder_counts.iter().map(move |&n| (r, n)))
        .collect();
    cells
        .into_par_iter()
        .map(|(r, n)| scan_cell(spec, r, n))
        .collect()
}

/// [`scan_grid`] with a non-negative causal increment applied to the
/// dependent column. A zero increment reproduces `scan_grid` exactly.
pub fn scan_grid_causal(spec: &GridSpec) -> Result<Vec<GridRow>> {
    if !(spec.causal_increment >= 0.0) {
        return Err(Error::invalid(format!(
            "causal increment {} must be non-negative",
            spec.causal_increment
        )));
    }
    scan_grid(spec)
}
