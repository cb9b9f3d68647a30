//! Latent-variable population generator.
//!
//! Each respondent carries a hidden binary trait `Q ∈ {−1, +1}` drawn with
//! equal odds. Every observed answer agrees with that trait with probability
//! `p` and disagrees otherwise, independently per answer:
//!
//! ```text
//! R[i][j] = (Q[i] * Y[i][j] + 1) / 2,   Y[i][j] = +1 w.p. p, −1 w.p. 1 − p
//! ```
//!
//! No answer causes any other, yet every pair of columns is correlated with
//! `r = (2p − 1)²`.
//!
//! With a non-zero causal increment `β′`, column 0 is instead drawn with
//! probability `logit⁻¹(logit(pᵢ) + β′·R[i][1])`, where `pᵢ = P(R[i][0] = 1 | Qᵢ)`
//! is `p` for `Qᵢ = +1` and `1 − p` for `Qᵢ = −1`. This choice of `pᵢ` is a
//! modelling decision of this crate, not something the generator forces. The
//! increment is applied per respondent after the latent class is drawn.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{inverse_logit, logit};
use crate::rng;

const POPULATION_DOMAIN: u64 = 0x504f_5055;

/// Bias `b = 2p − 1`. Accepts the closed interval `[0, 1]`.
pub fn bias_of(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(2.0 * p - 1.0)
}

/// Inverse of [`bias_of`]: `p = (b + 1) / 2`.
pub fn p_of(bias: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&bias) {
        return Err(Error::invalid(format!("bias {bias} outside [-1, 1]")));
    }
    Ok((bias + 1.0) / 2.0)
}

/// Pairwise correlation between any two generated columns, `(2p − 1)²`.
pub fn theoretical_correlation(p: f64) -> Result<f64> {
    check_open_p(p)?;
    let b = 2.0 * p - 1.0;
    Ok(b * b)
}

/// Agreement probability giving pairwise correlation `r`: `p = (1 + √r) / 2`.
pub fn p_for_correlation(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid(format!("correlation {r} outside (0, 1)")));
    }
    Ok((1.0 + r.sqrt()) / 2.0)
}

fn check_open_p(p: f64) -> Result<()> {
    if p > 0.5 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("p = {p} must satisfy 0.5 < p < 1")))
    }
}

/// Configuration of one metamodel population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Probability that an answer agrees with the latent trait.
    pub p: f64,
    /// Regressors excluding the intercept: the predictor plus `k − 1` confounders.
    pub k: usize,
    pub n_respondents: usize,
    /// Logit increment `β′` of column 0 per unit of column 1.
    pub causal_increment: f64,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(p: f64, k: usize, n_respondents: usize, seed: u64) -> Result<Self> {
        let params = ModelParams {
            p,
            k,
            n_respondents,
            causal_increment: 0.0,
            seed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_causal_increment(mut self, beta_prime: f64) -> Result<Self> {
        self.causal_increment = beta_prime;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_open_p(self.p)?;
        if self.k < 1 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.n_respondents < 1 {
            return Err(Error::invalid("number of respondents must be at least 1"));
        }
        if !self.causal_increment.is_finite() {
            return Err(Error::invalid("causal increment must be finite"));
        }
        Ok(())
    }

    pub fn bias(&self) -> f64 {
        2.0 * self.p - 1.0
    }

    pub fn correlation(&self) -> f64 {
        self.bias() * self.bias()
    }

    /// Dependent column plus `k` regressor columns.
    pub fn column_count(&self) -> usize {
        self.k + 1
    }

    /// Stream selector for this population shape. Excludes the causal
    /// increment: runs differing only in `β′` share latent traits and uniforms.
    pub(crate) fn fingerprint(&self) -> u64 {
        rng::fold_keys(&[self.p.to_bits(), self.k as u64, self.n_respondents as u64])
    }
}

/// Generated responses plus the latent traits that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    latent: Vec<i8>,
    /// Row-major `N × (k + 1)`.
    responses: Vec<u8>,
    columns: usize,
    params: ModelParams,
}

impl ResponseMatrix {
    /// Assembles a matrix from raw parts, checking every invariant.
    pub fn from_parts(latent: Vec<i8>, responses: Vec<u8>, params: ModelParams) -> Result<Self> {
        let columns = params.column_count();
        if latent.len() != params.n_respondents {
            return Err(Error::invalid(format!(
                "latent vector has {} entries, expected {}",
                latent.len(),
                params.n_respondents
            )));
        }
        if responses.len() != params.n_respondents * columns {
            return Err(Error::invalid(format!(
                "response table has {} cells, expected {}",
                responses.len(),
                params.n_respondents * columns
            )));
        }
        if let Some(q) = latent.iter().find(|&&q| q != 1 && q != -1) {
            return Err(Error::invalid(format!("latent value {q} is not ±1")));
        }
        if let Some(r) = responses.iter().find(|&&r| r > 1) {
            return Err(Error::invalid(format!("response value {r} is not 0/1")));
        }
        Ok(ResponseMatrix {
            latent,
            responses,
            columns,
            params,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_rows(&self) -> usize {
        self.latent.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns
    }

    pub fn latent(&self) -> &[i8] {
        &self.latent
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.responses[i * self.columns..(i + 1) * self.columns]
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.responses[i * self.columns + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        assert!(j < self.columns, "column {j} out of range");
        self.responses
            .iter()
            .skip(j)
            .step_by(self.columns)
            .map(|&v| f64::from(v))
            .collect()
    }

    pub fn column_mean(&self, j: usize) -> f64 {
        let col = self.column(j);
        col.iter().sum::<f64>() / col.len() as f64
    }

    /// Dense CSV with header `Q,R0,R1,...,Rk`. Debugging format only.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("Q".to_string())
            .chain((0..self.columns).map(|j| format!("R{j}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::with_capacity(4 + 2 * self.columns);
        for i in 0..self.n_rows() {
            line.clear();
            line.push_str(if self.latent[i] > 0 { "1" } else { "-1" });
            for &r in self.row(i) {
                line.push(',');
                line.push(if r == 1 { '1' } else { '0' });
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Draws realization 0 of the population described by `params`.
pub fn draw_population(params: &ModelParams, column_count: usize) -> Result<ResponseMatrix> {
    if column_count != params.column_count() {
        return Err(Error::invalid(format!(
            "column count {column_count} must equal k + 1 = {}",
            params.column_count()
        )));
    }
    draw_realization(params, 0)
}

/// Draws one independent realization. The stream is keyed by the master
/// seed, the population shape and `realization`, so any subset of
/// realizations can be regenerated in any order.
pub fn draw_realization(params: &ModelParams, realization: u64) -> Result<ResponseMatrix> {
    params.validate()?;
    let n = params.n_respondents;
    let columns = params.column_count();
    let p = params.p;
    let beta_prime = params.causal_increment;
    let mut rng = rng::stream(
        params.seed,
        &[POPULATION_DOMAIN, params.fingerprint(), realization],
    );

    let mut latent = Vec::with_capacity(n);
    let mut responses = vec![0u8; n * columns];
    let mut uniforms = vec![0.0f64; columns];
    for row in responses.chunks_exact_mut(columns) {
        let q: i8 = if rng.gen::<f64>() < 0.5 { 1 } else { -1 };
        latent.push(q);
        for u in uniforms.iter_mut() {
            *u = rng.gen::<f64>();
        }
        for (cell, &u) in row.iter_mut().zip(&uniforms) {
            let agrees = u < p;
            *cell = u8::from(agrees == (q > 0));
        }
        if beta_prime != 0.0 && row[1] == 1 {
            // P(R0 = 1) = p′ for either latent class; the same uniform is
            // reused so that β′ = 0 reproduces the plain draw exactly.
            let p_i = if q > 0 { p } else { 1.0 - p };
            let shifted = inverse_logit(logit(p_i)? + beta_prime);
            let u = uniforms[0];
            row[0] = if q > 0 {
                u8::from(u < shifted)
            } else {
                u8::from(u >= 1.0 - shifted)
            };
        }
    }
    ResponseMatrix::from_parts(latent, responses, *params)
}

/// Pearson correlation of two columns of `m`.
pub fn sample_correlation(m: &ResponseMatrix, col_a: usize, col_b: usize) -> Result<f64> {
    if col_a == col_b {
        return Err(Error::invalid("correlation columns must be distinct"));
    }
    for c in [col_a, col_b] {
        if c >= m.n_cols() {
            return Err(Error::invalid(format!(
                "column {c} out of range for {} columns",
                m.n_cols()
            )));
        }
    }
    pearson(&m.column(col_a), &m.column(col_b)).map_err(|which| {
        Error::UndefinedCorrelation(if which == 0 { col_a } else { col_b })
    })
}

/// Pearson correlation; on a constant input returns `Err(0)` or `Err(1)`
/// naming the offending argument.
pub fn pearson(a: &[f64], b: &[f64]) -> std::result::Result<f64, usize> {
    assert_eq!(a.len(), b.len(), "pearson inputs differ in length");
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 {
        return Err(0);
    }
    if sbb == 0.0 {
        return Err(1);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
