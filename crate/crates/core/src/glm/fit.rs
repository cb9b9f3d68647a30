use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::linalg::{PivotedCholesky, RankDeficient};
use super::link::{inverse_logit, softplus};
use crate::error::{Error, Result};

/// Any coefficient beyond this magnitude is taken as a sign of separation.
pub const SEPARATION_COEFFICIENT: f64 = 30.0;
/// Fitted probabilities closer than this to 0 or 1 count as pinned.
pub const PINNED_PROBABILITY: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Convergence threshold on the largest absolute coefficient update.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Square roots of the diagonal of the inverse information matrix at the
    /// final estimate; NaN where the information matrix could not be inverted.
    pub std_errors: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub separation_detected: bool,
    /// Log-likelihood at the start value and after every accepted step.
    pub log_likelihood_trace: Vec<f64>,
}

impl FitResult {
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.coefficients[i], self.std_errors[i]))
    }
}

/// Bernoulli log-likelihood of `y` under the logistic model with
/// coefficients `beta`.
pub fn log_likelihood(y: &[f64], x: &DesignMatrix, beta: &[f64]) -> f64 {
    x.mul_vec(beta)
        .iter()
        .zip(y)
        .map(|(&eta, &yi)| yi * eta - softplus(eta))
        .sum()
}

/// Gradient of [`log_likelihood`]: `Xᵀ(y − μ)`.
pub fn score(y: &[f64], x: &DesignMatrix, beta: &[f64]) -> Vec<f64> {
    let m = x.cols();
    let mut g = vec![0.0; m];
    for (i, eta) in x.mul_vec(beta).into_iter().enumerate() {
        let resid = y[i] - inverse_logit(eta);
        for (gj, xj) in g.iter_mut().zip(x.row(i)) {
            *gj += xj * resid;
        }
    }
    g
}

struct Evaluation {
    log_likelihood: f64,
    score: Vec<f64>,
    /// Full symmetric `XᵀWX`, row-major.
    information: Vec<f64>,
    mu: Vec<f64>,
}

fn evaluate(y: &[f64], x: &DesignMatrix, beta: &[f64]) -> Evaluation {
    let m = x.cols();
    let mut score = vec![0.0; m];
    let mut information = vec![0.0; m * m];
    let mut ll = 0.0;
    let eta = x.mul_vec(beta);
    let mut mu = Vec::with_capacity(eta.len());
    for (i, &e) in eta.iter().enumerate() {
        let p = inverse_logit(e);
        mu.push(p);
        ll += y[i] * e - softplus(e);
        let w = p * (1.0 - p);
        let resid = y[i] - p;
        let row = x.row(i);
        for a in 0..m {
            score[a] += row[a] * resid;
            let wa = w * row[a];
            if wa == 0.0 {
                continue;
            }
            for b in a..m {
                information[a * m + b] += wa * row[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            information[a * m + b] = information[b * m + a];
        }
    }
    Evaluation {
        log_likelihood: ll,
        score,
        information,
        mu,
    }
}

fn pinned(y: &[f64], mu: &[f64]) -> bool {
    let positives_pinned = y
        .iter()
        .zip(mu)
        .filter(|(&yi, _)| yi == 1.0)
        .all(|(_, &p)| p > 1.0 - PINNED_PROBABILITY);
    let negatives_pinned = y
        .iter()
        .zip(mu)
        .filter(|(&yi, _)| yi == 0.0)
        .all(|(_, &p)| p < PINNED_PROBABILITY);
    positives_pinned || negatives_pinned
}

/// Maximum-likelihood logistic regression by Newton–Raphson (IRLS) with
/// step halving.
///
/// Fails with [`Error::SingularDesign`] when the columns of `x` are linearly
/// dependent. Separation and exhausted iteration budgets are not errors: the
/// result comes back with `converged = false` and the relevant flag set.
pub fn fit_logistic(y: &[f64], x: &DesignMatrix, opts: &FitOptions) -> Result<FitResult> {
    let (n, m) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::invalid(format!(
            "response has {} entries but design has {n} rows",
            y.len()
        )));
    }
    if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(format!("response value {v} is not 0/1")));
    }
    if n <= m {
        return Err(Error::invalid(format!(
            "need more observations ({n}) than coefficients ({m})"
        )));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::invalid("tolerance must be positive and max_iter non-zero"));
    }

    let singular = |RankDeficient(j): RankDeficient| Error::SingularDesign {
        column: j,
        name: x.names()[j].clone(),
    };

    let mut beta = vec![0.0; m];
    let mut eval = evaluate(y, x, &beta);
    // At β = 0 every weight is 1/4, so this is a rank check of XᵀX itself.
    let mut factor = PivotedCholesky::factor(&eval.information, m).map_err(singular)?;
    let mut trace = vec![eval.log_likelihood];
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let step = factor.solve(&eval.score);
        let mut scale = 1.0;
        let mut candidate: Vec<f64>;
        let mut halvings = 0;
        loop {
            candidate = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let ll = log_likelihood(y, x, &candidate);
            let slack = 1e-12 * (1.0 + eval.log_likelihood.abs());
            if ll >= eval.log_likelihood - slack || halvings == MAX_HALVINGS {
                break;
            }
            scale *= 0.5;
            halvings += 1;
        }
        let max_update = step.iter().map(|s| (scale * s).abs()).fold(0.0, f64::max);
        beta = candidate;
        eval = evaluate(y, x, &beta);
        trace.push(eval.log_likelihood);

        if beta.iter().any(|b| b.abs() > SEPARATION_COEFFICIENT) || pinned(y, &eval.mu) {
            separation = true;
            break;
        }
        if max_update < opts.tol {
            converged = true;
            break;
        }
        match PivotedCholesky::factor(&eval.information, m) {
            Ok(f) => factor = f,
            Err(_) => {
                // Weights have collapsed onto a lower-rank subset of rows.
                separation = true;
                break;
            }
        }
    }

    let std_errors = match PivotedCholesky::factor(&eval.information, m) {
        Ok(f) => {
            let inv = f.inverse();
            (0..m).map(|j| inv[j * m + j].max(0.0).sqrt()).collect()
        }
        Err(_) => vec![f64::NAN; m],
    };
    if converged && std_errors.iter().any(|s| !(*s > 0.0)) {
        converged = false;
    }

    Ok(FitResult {
        names: x.names().to_vec(),
        coefficients: beta,
        std_errors,
        converged: converged && !separation,
        iterations,
        log_likelihood: eval.log_likelihood,
        separation_detected: separation,
        log_likelihood_trace: trace,
    })
}
