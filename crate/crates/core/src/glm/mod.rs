//! Binary logistic regression fitted by maximum likelihood, with the
//! inference helpers used downstream (normal intervals, relative risk).

mod design;
mod fit;
mod inference;
mod linalg;
mod link;

pub use design::{one_hot, DesignMatrix, OneHot, INTERCEPT_NAME};
pub use fit::{
    fit_logistic, log_likelihood, score, FitOptions, FitResult, PINNED_PROBABILITY,
    SEPARATION_COEFFICIENT,
};
pub use inference::{confidence_interval, normal_interval, normal_quantile, relative_risk};
pub use link::{inverse_logit, logit, LOGIT_CLAMP};
