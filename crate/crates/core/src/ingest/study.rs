use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::mapping::ColumnKind;
use super::table::MappedTable;
use crate::error::{Error, Result};
use crate::glm::{
    fit_logistic, normal_interval, one_hot, relative_risk, DesignMatrix, FitOptions, FitResult,
};

fn default_unit_change() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub columns: Vec<String>,
}

/// Which columns play dependent, predictor and confounder roles, with the
/// confounders grouped into cumulative stages.
///
/// Study files are TOML:
///
/// ```toml
/// dependent = "SPPAINT"
/// independent = "ALCYRTOT"
/// unit_change = 52.18
///
/// [[stages]]
/// name = "A"
/// columns = ["IRSEX", "AGE3"]
///
/// [[stages]]
/// name = "B"
/// columns = ["MJEVER"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub dependent: String,
    pub independent: String,
    pub stages: Vec<Stage>,
    /// Predictor change the reported coefficient refers to, in the
    /// predictor's own units (e.g. 52.18 days/year for "one more day a week").
    #[serde(default = "default_unit_change")]
    pub unit_change: f64,
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl StudySpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: StudySpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Study(m));
        if self.dependent == self.independent {
            return fail("dependent and independent columns must differ".into());
        }
        if self.stages.is_empty() {
            return fail("at least one stage is required".into());
        }
        let mut stage_names = HashSet::new();
        let mut seen = HashSet::new();
        for stage in &self.stages {
            if !stage_names.insert(stage.name.as_str()) {
                return fail(format!("stage name '{}' used twice", stage.name));
            }
            for col in &stage.columns {
                if *col == self.dependent || *col == self.independent {
                    return fail(format!(
                        "stage '{}' lists '{col}', which is the dependent or independent column",
                        stage.name
                    ));
                }
                if !seen.insert(col.as_str()) {
                    return fail(format!("column '{col}' appears in more than one stage"));
                }
            }
        }
        if !(self.unit_change.is_finite() && self.unit_change != 0.0) {
            return fail(format!("unit_change {} must be finite and non-zero", self.unit_change));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return fail(format!("level {} outside (0, 1)", self.level));
        }
        Ok(())
    }

    /// Confounders of `stage` and every stage before it, in declaration order.
    pub fn confounders_through(&self, stage: &str) -> Result<Vec<&str>> {
        let idx = self
            .stages
            .iter()
            .position(|s| s.name == stage)
            .ok_or_else(|| Error::Study(format!("no stage named '{stage}'")))?;
        Ok(self.stages[..=idx]
            .iter()
            .flat_map(|s| s.columns.iter().map(String::as_str))
            .collect())
    }

    /// Cumulative label, e.g. `A+B+C` for stage `C`.
    pub fn cumulative_label(&self, stage: &str) -> String {
        let names: Vec<&str> = self.stages.iter().map(|s| s.name.as_str()).collect();
        match names.iter().position(|n| *n == stage) {
            Some(i) => names[..=i].join("+"),
            None => stage.to_string(),
        }
    }
}

/// Response vector and design for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDesign {
    pub y: Vec<f64>,
    pub design: DesignMatrix,
    /// Respondents dropped because the dependent value was missing.
    pub dropped_missing: usize,
    /// Design columns contributed by confounders (after one-hot expansion).
    pub confounder_columns: usize,
}

/// Builds `y` and the design `[intercept] + independent + confounders` for
/// the cumulative confounder set of `stage`. CAT confounders are one-hot
/// encoded against category 0 (or the smallest observed code when 0 is
/// absent).
pub fn build_design(data: &MappedTable, study: &StudySpec, stage: &str) -> Result<StageDesign> {
    study.validate()?;
    let confounders = study.confounders_through(stage)?;
    let column = |name: &str| {
        data.get(name).ok_or_else(|| {
            Error::Study(format!("column '{name}' is not in the mapped data (add it to the mapping file)"))
        })
    };

    let dep = column(&study.dependent)?;
    let keep: Vec<usize> = (0..data.n_rows).filter(|&i| dep.values[i].is_some()).collect();
    let dropped_missing = data.n_rows - keep.len();
    let mut y = Vec::with_capacity(keep.len());
    for &i in &keep {
        match dep.values[i] {
            Some(0) => y.push(0.0),
            Some(1) => y.push(1.0),
            Some(v) => {
                return Err(Error::Ingest {
                    row: i + 1,
                    column: study.dependent.clone(),
                    message: format!("dependent value {v} is not binary after mapping"),
                })
            }
            None => unreachable!(),
        }
    }

    let extract = |name: &str| -> Result<Vec<i64>> {
        let col = column(name)?;
        keep.iter()
            .map(|&i| {
                col.values[i].ok_or_else(|| Error::Ingest {
                    row: i + 1,
                    column: name.to_string(),
                    message: "missing value in a regressor column".into(),
                })
            })
            .collect()
    };

    let independent = column(&study.independent)?;
    if independent.kind == ColumnKind::Categorical {
        return Err(Error::Study(format!(
            "independent column '{}' must be ORD",
            study.independent
        )));
    }
    let mut columns: Vec<(String, Vec<f64>)> = vec![(
        study.independent.clone(),
        extract(&study.independent)?.into_iter().map(|v| v as f64).collect(),
    )];
    for name in &confounders {
        let values = extract(name)?;
        match column(name)?.kind {
            ColumnKind::Ordinal => {
                columns.push((name.to_string(), values.into_iter().map(|v| v as f64).collect()))
            }
            ColumnKind::Categorical => {
                let reference = if values.contains(&0) {
                    0
                } else {
                    values.iter().copied().min().unwrap_or(0)
                };
                let oh = one_hot(&values, reference).map_err(|e| {
                    Error::Study(format!("categorical column '{name}': {e}"))
                })?;
                for (cat, col) in oh.categories.iter().zip(oh.columns) {
                    columns.push((format!("{name}={cat}"), col));
                }
            }
        }
    }
    let confounder_columns = columns.len() - 1;
    let design = DesignMatrix::from_columns(columns, study.intercept)?;
    Ok(StageDesign {
        y,
        design,
        dropped_missing,
        confounder_columns,
    })
}

/// One row of a staged analysis. The leading fields mirror the grid output
/// schema so the same plotting code reads both; `r` is always empty here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: String,
    pub r: Option<f64>,
    pub n_confounders: usize,
    #[serde(rename = "N")]
    pub n_respondents: usize,
    pub replications: usize,
    /// Predictor coefficient per `unit_change`.
    pub mean_beta1: Option<f64>,
    pub mean_sigma1: Option<f64>,
    pub relative_risk: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// 1 when the stage produced no usable fit.
    pub excluded: usize,
    pub label: String,
    pub design_columns: usize,
    pub baseline_prevalence: Option<f64>,
    pub unit_change: f64,
    pub dropped_missing: usize,
    pub converged: bool,
    pub separation_detected: bool,
    pub status: String,
}

impl StageRow {
    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

/// Fits one stage and converts the predictor coefficient to a relative risk.
pub fn analyze_stage(
    data: &MappedTable,
    study: &StudySpec,
    stage: &str,
    unit_change: f64,
) -> Result<(StageRow, FitResult)> {
    let sd = build_design(data, study, stage)?;
    let fit = fit_logistic(&sd.y, &sd.design, &FitOptions::default())?;
    let prevalence = sd.y.iter().sum::<f64>() / sd.y.len() as f64;
    let idx = usize::from(study.intercept);
    let mut row = StageRow {
        stage: stage.to_string(),
        r: None,
        n_confounders: sd.confounder_columns,
        n_respondents: sd.y.len(),
        replications: 1,
        mean_beta1: None,
        mean_sigma1: None,
        relative_risk: None,
        ci_low: None,
        ci_high: None,
        excluded: 1,
        label: study.cumulative_label(stage),
        design_columns: sd.design.cols(),
        baseline_prevalence: Some(prevalence),
        unit_change,
        dropped_missing: sd.dropped_missing,
        converged: fit.converged,
        separation_detected: fit.separation_detected,
        status: String::new(),
    };
    if !fit.converged {
        row.status = if fit.separation_detected {
            "separation detected".into()
        } else {
            format!("not converged after {} iterations", fit.iterations)
        };
        return Ok((row, fit));
    }
    let beta = fit.coefficients[idx] * unit_change;
    let sigma = fit.std_errors[idx] * unit_change.abs();
    let (lo, hi) = normal_interval(beta, sigma, study.level)?;
    row.mean_beta1 = Some(beta);
    row.mean_sigma1 = Some(sigma);
    row.relative_risk = Some(relative_risk(beta, prevalence)?);
    row.ci_low = Some(relative_risk(lo, prevalence)?);
    row.ci_high = Some(relative_risk(hi, prevalence)?);
    row.excluded = 0;
    row.status = "ok".into();
    Ok((row, fit))
}

/// Fits every cumulative stage in order. A stage that fails is reported in
/// its row's `status`; later stages still run.
pub fn staged_analysis(data: &MappedTable, study: &StudySpec, unit_change: f64) -> Result<Vec<StageRow>> {
    study.validate()?;
    if !(unit_change.is_finite() && unit_change != 0.0) {
        return Err(Error::invalid(format!("unit change {unit_change} must be finite and non-zero")));
    }
    let mut rows = Vec::with_capacity(study.stages.len());
    for stage in &study.stages {
        match analyze_stage(data, study, &stage.name, unit_change) {
            Ok((row, _)) => rows.push(row),
            Err(e) => rows.push(StageRow {
                stage: stage.name.clone(),
                r: None,
                n_confounders: 0,
                n_respondents: 0,
                replications: 1,
                mean_beta1: None,
                mean_sigma1: None,
                relative_risk: None,
                ci_low: None,
                ci_high: None,
                excluded: 1,
                label: study.cumulative_label(&stage.name),
                design_columns: 0,
                baseline_prevalence: None,
                unit_change,
                dropped_missing: 0,
                converged: false,
                separation_detected: false,
                status: e.to_string(),
            }),
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::table::MappedColumn;

    fn col(name: &str, kind: ColumnKind, values: Vec<Option<i64>>) -> MappedColumn {
        let mut categories: Vec<i64> = values.iter().flatten().copied().collect();
        categories.sort_unstable();
        categories.dedup();
        MappedColumn {
            name: name.into(),
            kind,
            values,
            categories: if kind == ColumnKind::Categorical { categories } else { vec![] },
        }
    }

    fn study(stages: &[(&str, &[&str])]) -> StudySpec {
        StudySpec {
            dependent: "Y".into(),
            independent: "X".into(),
            stages: stages
                .iter()
                .map(|(n, cols)| Stage {
                    name: n.to_string(),
                    columns: cols.iter().map(|c| c.to_string()).collect(),
                })
                .collect(),
            unit_change: 1.0,
            intercept: true,
            level: 0.95,
        }
    }

    fn table() -> MappedTable {
        let n = 12;
        let some = |f: &dyn Fn(i64) -> i64| (0..n).map(|i| Some(f(i))).collect::<Vec<_>>();
        let mut y = some(&|i| (i * 7 % 5 < 2) as i64);
        y[3] = None;
        MappedTable {
            n_rows: n as usize,
            columns: vec![
                col("Y", ColumnKind::Ordinal, y),
                col("X", ColumnKind::Ordinal, some(&|i| i % 4)),
                col("A", ColumnKind::Ordinal, some(&|i| (i % 3 == 0) as i64)),
                col("C", ColumnKind::Categorical, some(&|i| i % 3)),
            ],
        }
    }

    #[test]
    fn validation_rules() {
        let mut s = study(&[("A", &["A"]), ("B", &["C"])]);
        assert!(s.validate().is_ok());
        s.stages[1].columns.push("A".into());
        assert!(s.validate().is_err());
        let s2 = study(&[("A", &["Y"])]);
        assert!(s2.validate().is_err());
        let s3 = study(&[("A", &["A"]), ("A", &["C"])]);
        assert!(s3.validate().is_err());
        assert!(study(&[]).validate().is_err());
    }

    #[test]
    fn design_widths_grow_by_stage() {
        let s = study(&[("A", &["A"]), ("B", &["C"])]);
        let a = build_design(&table(), &s, "A").unwrap();
        let b = build_design(&table(), &s, "B").unwrap();
        assert_eq!(a.design.names(), &["(intercept)", "X", "A"]);
        assert_eq!(b.design.names(), &["(intercept)", "X", "A", "C=1", "C=2"]);
        assert_eq!((a.dropped_missing, a.y.len()), (1, 11));
        assert_eq!(b.confounder_columns, 3);
        assert!(build_design(&table(), &s, "Z").is_err());
        assert_eq!(s.cumulative_label("B"), "A+B");
    }

    #[test]
    fn non_binary_dependent_rejected() {
        let mut t = table();
        t.columns[0].values[0] = Some(2);
        let s = study(&[("A", &["A"])]);
        assert!(matches!(build_design(&t, &s, "A"), Err(Error::Ingest { row: 1, .. })));
    }

    #[test]
    fn missing_regressor_rejected() {
        let mut t = table();
        t.columns[2].values[5] = None;
        let s = study(&[("A", &["A"])]);
        assert!(matches!(build_design(&t, &s, "A"), Err(Error::Ingest { row: 6, .. })));
        let s = study(&[("A", &["NOPE"])]);
        assert!(build_design(&t, &s, "A").is_err());
    }

    #[test]
    fn parses_toml_study() {
        let s = StudySpec::from_toml_str(
            "dependent = \"Y\"\nindependent = \"X\"\nunit_change = 52.18\n[[stages]]\nname = \"A\"\ncolumns = [\"A\"]\n",
        )
        .unwrap();
        assert_eq!(s.unit_change, 52.18);
        assert!(s.intercept);
        assert!(StudySpec::from_toml_str("dependent = \"Y\"\n").is_err());
    }
}
