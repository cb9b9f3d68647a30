//! `confound`: simulate confounded survey populations, scan the spurious
//! association they produce, fit logistic models and run staged analyses on
//! recoded survey files.
//!
//! Exit codes: 0 success (including partial results with flagged rows),
//! 1 I/O failure, 2 usage or parse error, 3 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use confound_core::ensemble::{Baseline, DEFAULT_CI_POPULATION, DEFAULT_REPLICATIONS, DEFAULT_RESPONDENTS};
use confound_core::report::Format;

#[derive(Parser)]
#[command(name = "confound", version, about = "Spurious association from shared latent traits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one metamodel population and write it as CSV
    Simulate(SimulateArgs),
    /// Run the ensemble over a grid of correlations and confounder counts
    Scan(ScanArgs),
    /// Fit a logistic regression to columns of a CSV file
    Fit(FitArgs),
    /// Recode a survey file and fit each cumulative confounder stage
    Ingest(IngestArgs),
    /// Re-run the command recorded in an output file's metadata
    Replay(ReplayArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Probability that an answer agrees with the latent trait, in (0.5, 1)
    #[arg(long)]
    p: f64,
    /// Regressor columns (predictor plus confounders)
    #[arg(long)]
    k: usize,
    /// Respondents
    #[arg(long)]
    n: usize,
    /// Logit increment of the dependent column per unit of column 1
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta_prime: f64,
    #[arg(long)]
    seed: u64,
    /// Output file (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Pairwise correlations r
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.05,0.10,0.15")]
    r_list: Vec<f64>,
    /// Confounder counts n (each cell fits n + 1 regressors)
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    n_list: Vec<usize>,
    /// Respondents per simulated population
    #[arg(long = "N", default_value_t = DEFAULT_RESPONDENTS)]
    respondents: usize,
    /// Replications per cell
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    reps: usize,
    /// Causal logit increment of the dependent column (>= 0)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta_prime: f64,
    #[arg(long)]
    seed: u64,
    /// Prevalence for the relative-risk conversion: a number in [0, 1) or `mean`
    #[arg(long, default_value = "0", value_parser = parse_baseline)]
    baseline: Baseline,
    /// Population size the confidence intervals are rescaled to
    #[arg(long, default_value_t = DEFAULT_CI_POPULATION)]
    ci_n: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Include an intercept in every replication's regression
    #[arg(long)]
    intercept: bool,
    #[command(flatten)]
    output: OutputArgs,
    /// Worker threads (0 = all cores); results do not depend on it
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with a header row; `#` lines are skipped
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    dependent: String,
    /// Regressor columns; none gives an intercept-only model
    #[arg(long, value_delimiter = ',')]
    regressors: Vec<String>,
    #[arg(long)]
    no_intercept: bool,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct IngestArgs {
    /// Delimited survey file with a header row
    #[arg(long)]
    data: PathBuf,
    /// Column recoding file (`NAME KIND rules` per line)
    #[arg(long)]
    mapping: PathBuf,
    /// Study file (TOML) naming dependent, independent and stages
    #[arg(long)]
    study: PathBuf,
    /// Field delimiter: a single character or `tab`
    #[arg(long, default_value = "tab", value_parser = parse_delimiter)]
    delimiter: u8,
    /// Predictor change the coefficient refers to (overrides the study file)
    #[arg(long)]
    unit_change: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ReplayArgs {
    /// Output file written by an earlier run
    #[arg(long)]
    from: PathBuf,
    /// Output file (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: Format,
}

fn parse_baseline(s: &str) -> Result<Baseline, String> {
    if s == "mean" {
        return Ok(Baseline::DependentMean);
    }
    let b: f64 = s.parse().map_err(|_| format!("'{s}' is neither a number nor 'mean'"))?;
    if (0.0..1.0).contains(&b) {
        Ok(Baseline::Fixed(b))
    } else {
        Err(format!("baseline {b} outside [0, 1)"))
    }
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter '{s}' must be a single ASCII character or 'tab'")),
    }
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        _ => Err(format!("format '{s}' must be csv or json")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => {
            let out = a.out.clone();
            commands::simulate(a.into(), out)
        }
        Command::Scan(a) => {
            let out = a.output.out.clone();
            let threads = a.threads;
            commands::scan(a.into(), out, threads)
        }
        Command::Fit(a) => {
            let out = a.output.out.clone();
            commands::fit(a.into(), out)
        }
        Command::Ingest(a) => {
            let out = a.output.out.clone();
            commands::ingest(a.into(), out)
        }
        Command::Replay(a) => commands::replay(&a.from, a.out, a.threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("confound: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

impl From<SimulateArgs> for commands::SimulateConfig {
    fn from(a: SimulateArgs) -> Self {
        commands::SimulateConfig {
            p: a.p,
            k: a.k,
            n: a.n,
            beta_prime: a.beta_prime,
            seed: a.seed,
        }
    }
}

impl From<ScanArgs> for commands::ScanConfig {
    fn from(a: ScanArgs) -> Self {
        commands::ScanConfig {
            grid: confound_core::ensemble::GridSpec {
                correlations: a.r_list,
                confounder_counts: a.n_list,
                n_respondents: a.respondents,
                replications: a.reps,
                causal_increment: a.beta_prime,
                seed: a.seed,
                baseline: a.baseline,
                ci_population: a.ci_n,
                level: a.level,
                intercept: a.intercept,
            },
            format: a.output.format,
        }
    }
}

impl From<FitArgs> for commands::FitConfig {
    fn from(a: FitArgs) -> Self {
        commands::FitConfig {
            input: a.input,
            dependent: a.dependent,
            regressors: a.regressors,
            intercept: !a.no_intercept,
            level: a.level,
            format: a.output.format,
        }
    }
}

impl From<IngestArgs> for commands::IngestConfig {
    fn from(a: IngestArgs) -> Self {
        commands::IngestConfig {
            data: a.data,
            mapping: a.mapping,
            study: a.study,
            delimiter: char::from(a.delimiter),
            unit_change: a.unit_change,
            format: a.output.format,
        }
    }
}
