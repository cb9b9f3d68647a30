//! Spurious association under regression adjustment.
//!
//! * [`metamodel`]: populations whose answers share one hidden binary cause.
//! * [`glm`]: logistic regression by Newton–Raphson with standard errors.
//! * [`ensemble`]: Monte Carlo averages of the predictor coefficient and
//!   grid sweeps over correlation and confounder count.
//! * [`ingest`]: recoding of delimited survey files and staged confounder
//!   analyses.
//! * [`report`]: CSV/JSON output with embedded run metadata.

pub mod ensemble;
pub mod error;
pub mod glm;
pub mod ingest;
pub mod metamodel;
pub mod report;
pub mod rng;

pub use error::{Error, ErrorKind, Result};
