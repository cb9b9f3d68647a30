use super::fit::FitResult;
use crate::error::{Error, Result};

/// Fractional change in outcome probability when a regressor with logit
/// coefficient `beta1` increases by one unit, starting from baseline
/// probability `baseline_p`:
///
/// ```text
/// logit⁻¹(logit(p) + β₁) / p − 1 = exp(β₁) / (1 + (exp(β₁) − 1)·p) − 1
/// ```
///
/// The closed form extends continuously to `p = 0`, where it equals
/// `exp(β₁) − 1`.
pub fn relative_risk(beta1: f64, baseline_p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&baseline_p) {
        return Err(Error::invalid(format!(
            "baseline probability {baseline_p} outside [0, 1)"
        )));
    }
    // Rearranged as g(1 − p) / (1 + g·p) with g = exp(β₁) − 1 to keep
    // precision for small β₁.
    let growth = beta1.exp_m1();
    Ok(growth * (1.0 - baseline_p) / (1.0 + growth * baseline_p))
}

/// Two-sided normal interval `estimate ± z·std_error` at confidence `level`.
pub fn normal_interval(estimate: f64, std_error: f64, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    if !(std_error >= 0.0) {
        return Err(Error::invalid(format!("standard error {std_error} is negative or NaN")));
    }
    let z = normal_quantile(0.5 + level / 2.0);
    Ok((estimate - z * std_error, estimate + z * std_error))
}

/// Interval for coefficient `index` of a converged fit.
pub fn confidence_interval(fit: &FitResult, index: usize, level: f64) -> Result<(f64, f64)> {
    if !fit.converged {
        return Err(Error::NotConverged(
            "confidence intervals need a converged fit".into(),
        ));
    }
    let (&beta, &sigma) = fit
        .coefficients
        .get(index)
        .zip(fit.std_errors.get(index))
        .ok_or_else(|| Error::invalid(format!("coefficient index {index} out of range")))?;
    normal_interval(beta, sigma, level)
}

/// Standard normal quantile, Wichura's AS 241 (PPND16); relative accuracy
/// about 1e-16 over the open unit interval.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return if p == 0.0 { f64::NEG_INFINITY } else { f64::NAN };
    }
    if p >= 1.0 {
        return if p == 1.0 { f64::INFINITY } else { f64::NAN };
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    133.141_667_891_784_38,
    1_971.590_950_306_551_3,
    13_731.693_765_509_461,
    45_921.953_931_549_87,
    67_265.770_927_008_7,
    33_430.575_583_588_13,
    2_509.080_928_730_122_7,
];
const B: [f64; 8] = [
    1.0,
    42.313_330_701_600_91,
    687.187_007_492_057_9,
    5_394.196_021_424_751,
    21_213.794_301_586_597,
    39_307.895_800_092_71,
    28_729.085_735_721_943,
    5_226.495_278_852_545,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    0.241_780_725_177_450_6,
    0.022_723_844_989_269_184,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    0.689_767_334_985_1,
    0.148_103_976_427_480_08,
    0.015_198_666_563_616_457,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    0.296_560_571_828_504_9,
    0.026_532_189_526_576_124,
    0.001_242_660_947_388_078_4,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    0.599_832_206_555_888,
    0.136_929_880_922_735_8,
    0.014_875_361_290_850_615,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];
