use std::collections::BTreeSet;
use std::io::Read;

use super::mapping::{ColumnKind, ColumnSpec};
use crate::error::{Error, Result};

/// Delimited file as read: header names plus raw cell text.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

/// Reads a UTF-8 delimited file with a header row. Lines starting with `#`
/// are skipped.
pub fn read_delimited<R: Read>(reader: R, delimiter: u8) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(RawTable { headers, rows })
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "." | "NA")
}

/// A recoded column. `None` marks a missing response.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedColumn {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Option<i64>>,
    /// Distinct categories (CAT columns only), ascending.
    pub categories: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappedTable {
    pub n_rows: usize,
    pub columns: Vec<MappedColumn>,
}

impl MappedTable {
    pub fn get(&self, name: &str) -> Option<&MappedColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Recodes every column named in `specs`. Columns of `raw` without a spec
/// are not carried over. Cells must be integers or empty (`""`, `.`, `NA`
/// count as missing); CAT values must be non-negative and, when the spec
/// declares categories, one of them.
pub fn apply_mappings(raw: &RawTable, specs: &[ColumnSpec]) -> Result<MappedTable> {
    let mut columns = Vec::with_capacity(specs.len());
    for spec in specs {
        let idx = raw.column_index(&spec.name).ok_or_else(|| Error::Ingest {
            row: 0,
            column: spec.name.clone(),
            message: "column not present in data header".into(),
        })?;
        let mut values = Vec::with_capacity(raw.rows.len());
        for (r, row) in raw.rows.iter().enumerate() {
            let cell_err = |message: String| Error::Ingest {
                row: r + 1,
                column: spec.name.clone(),
                message,
            };
            let cell = row.get(idx).map(String::as_str).unwrap_or("");
            if is_missing(cell) {
                values.push(None);
                continue;
            }
            let raw_value: i64 = cell
                .parse()
                .map_err(|_| cell_err(format!("'{cell}' is not an integer")))?;
            let value = spec.map(raw_value);
            if spec.kind == ColumnKind::Categorical {
                if value < 0 {
                    return Err(cell_err(format!("category {value} is negative")));
                }
                if let Some(allowed) = &spec.categories {
                    if !allowed.contains(&value) {
                        return Err(cell_err(format!(
                            "category {value} outside declared categories {allowed:?}"
                        )));
                    }
                }
            }
            values.push(Some(value));
        }
        let categories = match spec.kind {
            ColumnKind::Categorical => values
                .iter()
                .flatten()
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            ColumnKind::Ordinal => Vec::new(),
        };
        columns.push(MappedColumn {
            name: spec.name.clone(),
            kind: spec.kind,
            values,
            categories,
        });
    }
    Ok(MappedTable {
        n_rows: raw.rows.len(),
        columns,
    })
}
