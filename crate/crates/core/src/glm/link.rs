use crate::error::{Error, Result};

/// Inputs beyond this magnitude are clamped before exponentiation.
pub const LOGIT_CLAMP: f64 = 36.0;

/// `log(p / (1 − p))` on the open unit interval.
pub fn logit(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok((p / (1.0 - p)).ln())
    } else {
        Err(Error::invalid(format!("logit undefined at p = {p}")))
    }
}

/// Logistic function, clamped to `|x| ≤ 36` so the result stays strictly
/// inside (0, 1).
pub fn inverse_logit(x: f64) -> f64 {
    let x = x.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
