//! CSV and JSON writers shared by the grid and staged-analysis outputs.
//!
//! Both formats carry the same field set. CSV files start with `#` comment
//! lines holding the run metadata; JSON files wrap the rows as
//! `{"metadata": ..., "rows": [...]}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const TOOL_NAME: &str = "confound";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Provenance embedded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    /// Fully resolved configuration of the run.
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Metadata {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            seed,
            config,
        }
    }

    /// Reads the metadata back out of a CSV produced by [`write_csv`].
    pub fn from_csv_comments(text: &str) -> Option<Metadata> {
        text.lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.strip_prefix("# metadata: "))
            .and_then(|json| serde_json::from_str(json).ok())
    }
}

pub fn write_csv<W: Write, T: Serialize>(mut out: W, meta: &Metadata, rows: &[T]) -> Result<()> {
    writeln!(out, "# {} {}", meta.tool, meta.version)?;
    writeln!(out, "# metadata: {}", serde_json::to_string(meta)?)?;
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, meta: &Metadata, rows: &[T]) -> Result<()> {
    #[derive(Serialize)]
    struct Document<'a, T> {
        metadata: &'a Metadata,
        rows: &'a [T],
    }
    serde_json::to_writer_pretty(&mut out, &Document { metadata: meta, rows })?;
    writeln!(out)?;
    Ok(())
}

pub fn write<W: Write, T: Serialize>(out: W, format: Format, meta: &Metadata, rows: &[T]) -> Result<()> {
    match format {
        Format::Csv => write_csv(out, meta, rows),
        Format::Json => write_json(out, meta, rows),
    }
}
