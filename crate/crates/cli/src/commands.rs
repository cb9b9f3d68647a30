use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use confound_core::ensemble::{scan_grid_causal, GridSpec};
use confound_core::glm::{fit_logistic, normal_interval, relative_risk, DesignMatrix, FitOptions};
use confound_core::ingest::{apply_mappings, parse_mapping_file, read_delimited, staged_analysis, StudySpec};
use confound_core::metamodel::{draw_population, ModelParams};
use confound_core::report::{self, Format, Metadata};
use confound_core::{Error, ErrorKind};
use serde::{Deserialize, Serialize};

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Io => EXIT_IO,
            ErrorKind::Usage => EXIT_USAGE,
            ErrorKind::Numerical => EXIT_NUMERICAL,
        };
        Failure::new(code, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Inputs that cannot be read are a usage error, not an I/O failure.
fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Failure::new(EXIT_IO, format!("cannot create {}: {e}", path.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn finish(mut w: Box<dyn Write>) -> Outcome {
    w.flush()
        .map_err(|e| Failure::new(EXIT_IO, format!("write failed: {e}")))
}

fn config_json<T: Serialize>(config: &T) -> serde_json::Value {
    serde_json::to_value(config).expect("configuration serializes")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub p: f64,
    pub k: usize,
    pub n: usize,
    pub beta_prime: f64,
    pub seed: u64,
}

pub fn simulate(config: SimulateConfig, out: Option<PathBuf>) -> Outcome {
    let params = ModelParams::new(config.p, config.k, config.n, config.seed)?
        .with_causal_increment(config.beta_prime)?;
    let matrix = draw_population(&params, params.column_count())?;
    let meta = Metadata::new("simulate", Some(config.seed), config_json(&config));
    let mut w = open_output(out.as_deref())?;
    let header = format!(
        "# {} {}\n# metadata: {}\n",
        meta.tool,
        meta.version,
        serde_json::to_string(&meta).map_err(Error::from)?
    );
    w.write_all(header.as_bytes()).map_err(Error::from)?;
    matrix.write_csv(&mut w)?;
    finish(w)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub grid: GridSpec,
    pub format: Format,
}

pub fn scan(config: ScanConfig, out: Option<PathBuf>, threads: usize) -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot start {threads} threads: {e}")))?;
    let rows = pool.install(|| scan_grid_causal(&config.grid))?;
    let ok = rows.iter().filter(|r| r.succeeded()).count();
    let meta = Metadata::new("scan", Some(config.grid.seed), config_json(&config));
    let mut w = open_output(out.as_deref())?;
    report::write(&mut w, config.format, &meta, &rows)?;
    finish(w)?;
    eprintln!("{ok} of {} cells succeeded", rows.len());
    for row in rows.iter().filter(|r| !r.succeeded()) {
        eprintln!("cell r={} n={}: {}", row.r, row.n_confounders, row.status);
    }
    if ok == 0 {
        return Err(Failure::new(EXIT_NUMERICAL, "no grid cell succeeded"));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub input: PathBuf,
    pub dependent: String,
    pub regressors: Vec<String>,
    pub intercept: bool,
    pub level: f64,
    pub format: Format,
}

#[derive(Debug, Serialize)]
struct CoefficientRow {
    name: String,
    coefficient: f64,
    std_error: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    relative_risk: Option<f64>,
    baseline_prevalence: f64,
    converged: bool,
    separation_detected: bool,
    iterations: usize,
    log_likelihood: f64,
}

fn numeric_column(table: &confound_core::ingest::RawTable, name: &str) -> Result<Vec<f64>, Failure> {
    let idx = table
        .column_index(name)
        .ok_or_else(|| Failure::new(EXIT_USAGE, format!("column '{name}' not in input header")))?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let cell = row.get(idx).map(String::as_str).unwrap_or("");
            cell.parse::<f64>().map_err(|_| {
                Failure::new(
                    EXIT_USAGE,
                    format!("row {}, column '{name}': '{cell}' is not a number", i + 1),
                )
            })
        })
        .collect()
}

pub fn fit(config: FitConfig, out: Option<PathBuf>) -> Outcome {
    let text = read_input(&config.input)?;
    let table = read_delimited(text.as_bytes(), b',')?;
    let y = numeric_column(&table, &config.dependent)?;
    let columns = config
        .regressors
        .iter()
        .map(|name| Ok((name.clone(), numeric_column(&table, name)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let design = match (columns.is_empty(), config.intercept) {
        (true, true) => DesignMatrix::intercept_only(y.len())?,
        (true, false) => {
            return Err(Failure::new(EXIT_USAGE, "no regressors and no intercept: nothing to fit"))
        }
        (false, _) => DesignMatrix::from_columns(columns, config.intercept)?,
    };
    let fit = fit_logistic(&y, &design, &FitOptions::default())?;
    let prevalence = y.iter().sum::<f64>() / y.len() as f64;

    let mut rows = Vec::with_capacity(fit.names.len());
    for (i, name) in fit.names.iter().enumerate() {
        let (beta, se) = (fit.coefficients[i], fit.std_errors[i]);
        let interval = se.is_finite().then(|| normal_interval(beta, se, config.level)).transpose()?;
        let is_intercept = config.intercept && i == 0;
        let rr = if is_intercept { None } else { relative_risk(beta, prevalence).ok() };
        rows.push(CoefficientRow {
            name: name.clone(),
            coefficient: beta,
            std_error: se.is_finite().then_some(se),
            ci_low: interval.map(|c| c.0),
            ci_high: interval.map(|c| c.1),
            relative_risk: rr,
            baseline_prevalence: prevalence,
            converged: fit.converged,
            separation_detected: fit.separation_detected,
            iterations: fit.iterations,
            log_likelihood: fit.log_likelihood,
        });
    }

    println!(
        "{:<16} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "term", "coef", "std err", "ci low", "ci high", "rel. risk"
    );
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    for r in &rows {
        println!(
            "{:<16} {:>12.6} {:>12} {:>12} {:>12} {:>12}",
            r.name,
            r.coefficient,
            show(r.std_error),
            show(r.ci_low),
            show(r.ci_high),
            show(r.relative_risk)
        );
    }
    println!(
        "N = {}, log-likelihood = {:.6}, iterations = {}, converged = {}, separation = {}",
        y.len(),
        fit.log_likelihood,
        fit.iterations,
        fit.converged,
        fit.separation_detected
    );
    if fit.separation_detected {
        eprintln!("warning: separation detected; estimates diverge and are not reliable");
    }

    if let Some(path) = out {
        let meta = Metadata::new("fit", None, config_json(&config));
        let mut w = open_output(Some(&path))?;
        report::write(&mut w, config.format, &meta, &rows)?;
        finish(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    pub data: PathBuf,
    pub mapping: PathBuf,
    pub study: PathBuf,
    pub delimiter: char,
    pub unit_change: Option<f64>,
    pub format: Format,
}

pub fn ingest(config: IngestConfig, out: Option<PathBuf>) -> Outcome {
    let mapping = parse_mapping_file(&read_input(&config.mapping)?)?;
    for w in &mapping.warnings {
        eprintln!("warning: {w}");
    }
    let study = StudySpec::from_toml_str(&read_input(&config.study)?)?;
    let delimiter = u8::try_from(config.delimiter)
        .map_err(|_| Failure::new(EXIT_USAGE, "delimiter must be ASCII"))?;
    let raw = read_delimited(read_input(&config.data)?.as_bytes(), delimiter)?;
    let data = apply_mappings(&raw, &mapping.columns)?;
    let unit_change = config.unit_change.unwrap_or(study.unit_change);
    let rows = staged_analysis(&data, &study, unit_change)?;

    let meta = Metadata::new("ingest", None, config_json(&config));
    let mut w = open_output(out.as_deref())?;
    report::write(&mut w, config.format, &meta, &rows)?;
    finish(w)?;
    for row in rows.iter().filter(|r| !r.succeeded()) {
        eprintln!("stage {}: {}", row.stage, row.status);
    }
    if rows.iter().all(|r| !r.succeeded()) {
        return Err(Failure::new(EXIT_NUMERICAL, "no stage produced a usable fit"));
    }
    Ok(())
}

/// Reads the metadata of an earlier output (CSV comment header or JSON
/// document) and runs the same command with the same configuration.
pub fn replay(from: &Path, out: Option<PathBuf>, threads: usize) -> Outcome {
    let text = read_input(from)?;
    let meta = if text.trim_start().starts_with('{') {
        let doc: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
        serde_json::from_value(doc["metadata"].clone()).ok()
    } else {
        Metadata::from_csv_comments(&text)
    }
    .ok_or_else(|| Failure::new(EXIT_USAGE, format!("{} carries no run metadata", from.display())))?;

    let value = meta.config;
    let bad = |e: serde_json::Error| Failure::new(EXIT_USAGE, format!("unreadable configuration: {e}"));
    match meta.command.as_str() {
        "simulate" => simulate(serde_json::from_value(value).map_err(bad)?, out),
        "scan" => scan(serde_json::from_value(value).map_err(bad)?, out, threads),
        "fit" => fit(serde_json::from_value(value).map_err(bad)?, out),
        "ingest" => ingest(serde_json::from_value(value).map_err(bad)?, out),
        other => Err(Failure::new(EXIT_USAGE, format!("unknown command '{other}' in metadata"))),
    }
}
