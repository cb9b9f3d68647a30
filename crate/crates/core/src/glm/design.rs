use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub const INTERCEPT_NAME: &str = "(intercept)";

/// Regressor matrix, row-major. When `intercept_included` is set, column 0
/// is the constant column of ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    names: Vec<String>,
    intercept_included: bool,
}

impl DesignMatrix {
    /// Builds a design from named columns, prepending an intercept when asked.
    /// An all-zero regressor column is reported as a singular design.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>, intercept: bool) -> Result<Self> {
        let rows = match columns.first() {
            Some((_, c)) => c.len(),
            None if intercept => {
                return Err(Error::invalid(
                    "intercept-only design needs an explicit row count; use DesignMatrix::intercept_only",
                ))
            }
            None => return Err(Error::invalid("design needs at least one column")),
        };
        for (j, (name, col)) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::invalid(format!(
                    "column '{name}' has {} rows, expected {rows}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("column '{name}' has non-finite values")));
            }
            if col.iter().all(|&v| v == 0.0) {
                return Err(Error::SingularDesign {
                    column: j + usize::from(intercept),
                    name: name.clone(),
                });
            }
        }
        let cols = columns.len() + usize::from(intercept);
        let mut names = Vec::with_capacity(cols);
        if intercept {
            names.push(INTERCEPT_NAME.to_string());
        }
        names.extend(columns.iter().map(|(n, _)| n.clone()));
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            if intercept {
                values.push(1.0);
            }
            values.extend(columns.iter().map(|(_, c)| c[i]));
        }
        Ok(DesignMatrix {
            rows,
            cols,
            values,
            names,
            intercept_included: intercept,
        })
    }

    pub fn intercept_only(rows: usize) -> Result<Self> {
        if rows == 0 {
            return Err(Error::invalid("design needs at least one row"));
        }
        Ok(DesignMatrix {
            rows,
            cols: 1,
            values: vec![1.0; rows],
            names: vec![INTERCEPT_NAME.to_string()],
            intercept_included: true,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn intercept_included(&self) -> bool {
        self.intercept_included
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.values[i * self.cols + j]).collect()
    }

    /// Linear predictor `Xβ`.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.cols);
        self.values
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect()
    }
}

/// Indicator columns for a categorical variable.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHot {
    pub reference: i64,
    /// Non-reference categories in ascending order, one per column.
    pub categories: Vec<i64>,
    pub columns: Vec<Vec<f64>>,
}

/// Expands categorical codes into one 0/1 column per non-reference category.
pub fn one_hot(values: &[i64], reference: i64) -> Result<OneHot> {
    let distinct: BTreeSet<i64> = values.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::invalid(format!(
            "one-hot encoding needs at least two categories, found {}",
            distinct.len()
        )));
    }
    if !distinct.contains(&reference) {
        return Err(Error::invalid(format!(
            "reference category {reference} does not occur in the data"
        )));
    }
    let categories: Vec<i64> = distinct.into_iter().filter(|&c| c != reference).collect();
    let columns = categories
        .iter()
        .map(|&c| values.iter().map(|&v| f64::from(u8::from(v == c))).collect())
        .collect();
    Ok(OneHot {
        reference,
        categories,
        columns,
    })
}
