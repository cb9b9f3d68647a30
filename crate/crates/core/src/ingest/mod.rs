//! Survey ingestion: value recoding, staged confounder sets, and the
//! per-stage regressions built on them.

mod mapping;
mod study;
mod table;

pub use mapping::{
    apply_rules, find_overlaps, format_rules, parse_mapping_file, parse_mapping_rule,
    parse_mapping_rules_with, ColumnKind, ColumnSpec, MappingFile, MappingRule, OverlapPolicy,
};
pub use study::{analyze_stage, build_design, staged_analysis, Stage, StageDesign, StageRow, StudySpec};
pub use table::{apply_mappings, read_delimited, MappedColumn, MappedTable, RawTable};
