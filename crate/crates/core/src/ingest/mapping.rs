//! Value-recoding rules for survey columns.
//!
//! A rule list is written as comma-separated `src:dst` or `lo-hi:dst` tokens,
//! for example `2:0, 85-97:0`. Ranges are inclusive. A value is rewritten by
//! the first rule whose source covers it and passes through unchanged when
//! no rule matches. Sources are non-negative response codes; targets may be
//! negative.
//!
//! A mapping file has one column per line, `NAME KIND rules...`, where KIND
//! is `ORD` (ordinal, used as a number) or `CAT` (categorical, one-hot
//! encoded downstream). Blank lines and `#` comments are ignored.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MappingRule {
    pub low: i64,
    pub high: i64,
    pub target: i64,
}

impl MappingRule {
    /// `source` should be non-negative; negative sources have no text form.
    pub fn single(source: i64, target: i64) -> Self {
        MappingRule {
            low: source,
            high: source,
            target,
        }
    }

    pub fn range(low: i64, high: i64, target: i64) -> Result<Self> {
        if low > high {
            return Err(Error::invalid(format!("inverted range {low}-{high}")));
        }
        if low < 0 {
            return Err(Error::invalid(format!("negative source {low}")));
        }
        Ok(MappingRule { low, high, target })
    }

    pub fn matches(&self, value: i64) -> bool {
        (self.low..=self.high).contains(&value)
    }

    pub fn overlaps(&self, other: &MappingRule) -> bool {
        self.low <= other.high && other.low <= self.high
    }
}

impl fmt::Display for MappingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.low == self.high {
            write!(f, "{}:{}", self.low, self.target)
        } else {
            write!(f, "{}-{}:{}", self.low, self.high, self.target)
        }
    }
}

/// What to do when two rules in one list cover a common source value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapPolicy {
    Reject,
    /// Accept; the earlier rule shadows the later one on the shared values.
    FirstMatchWins,
}

/// Parses a rule list, rejecting overlapping sources.
pub fn parse_mapping_rule(text: &str) -> Result<Vec<MappingRule>> {
    parse_mapping_rules_with(text, OverlapPolicy::Reject)
}

pub fn parse_mapping_rules_with(text: &str, policy: OverlapPolicy) -> Result<Vec<MappingRule>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut rules: Vec<MappingRule> = Vec::new();
    let mut offset = 0;
    for raw in text.split(',') {
        let leading = raw.len() - raw.trim_start().len();
        let position = offset + leading + 1;
        offset += raw.len() + 1;
        let token = raw.trim();
        let rule = parse_token(token).map_err(|message| Error::Parse {
            line: 1,
            position,
            message: format!("token '{token}': {message}"),
        })?;
        if policy == OverlapPolicy::Reject {
            if let Some(prev) = rules.iter().find(|r| r.overlaps(&rule)) {
                return Err(Error::Parse {
                    line: 1,
                    position,
                    message: format!("token '{token}' overlaps earlier rule '{prev}'"),
                });
            }
        }
        rules.push(rule);
    }
    Ok(rules)
}

fn parse_token(token: &str) -> std::result::Result<MappingRule, String> {
    let (source, target) = token
        .split_once(':')
        .ok_or_else(|| "expected 'src:dst' or 'lo-hi:dst'".to_string())?;
    let target = parse_int(target.trim(), true)?;
    let source = source.trim();
    match source.split_once('-') {
        Some((lo, hi)) => {
            let (lo, hi) = (parse_int(lo.trim(), false)?, parse_int(hi.trim(), false)?);
            if lo > hi {
                return Err(format!("inverted range {lo}-{hi}"));
            }
            Ok(MappingRule {
                low: lo,
                high: hi,
                target,
            })
        }
        None => Ok(MappingRule::single(parse_int(source, false)?, target)),
    }
}

fn parse_int(s: &str, allow_sign: bool) -> std::result::Result<i64, String> {
    let digits = if allow_sign { s.strip_prefix('-').unwrap_or(s) } else { s };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("'{s}' is not an integer"));
    }
    s.parse().map_err(|e| format!("'{s}': {e}"))
}

/// Canonical text of a rule list; re-parses to the same rules.
pub fn format_rules(rules: &[MappingRule]) -> String {
    rules
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Pairs `(earlier, later)` of rules whose sources overlap.
pub fn find_overlaps(rules: &[MappingRule]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..rules.len() {
        for i in 0..j {
            if rules[i].overlaps(&rules[j]) {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn apply_rules(rules: &[MappingRule], value: i64) -> i64 {
    rules
        .iter()
        .find(|r| r.matches(value))
        .map_or(value, |r| r.target)
}

/// True when every value in `low..=high` matches one of `rules`.
fn covered(low: i64, high: i64, rules: &[MappingRule]) -> bool {
    let mut spans: Vec<(i64, i64)> = rules
        .iter()
        .filter(|r| r.low <= high && r.high >= low)
        .map(|r| (r.low, r.high))
        .collect();
    spans.sort_unstable();
    let mut next = low;
    for (lo, hi) in spans {
        if lo > next {
            return false;
        }
        if hi >= high {
            return true;
        }
        next = next.max(hi + 1);
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    #[serde(rename = "ORD")]
    Ordinal,
    #[serde(rename = "CAT")]
    Categorical,
}

impl FromStr for ColumnKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ORD" => Ok(ColumnKind::Ordinal),
            "CAT" => Ok(ColumnKind::Categorical),
            other => Err(format!("unknown column kind '{other}' (expected ORD or CAT)")),
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Ordinal => "ORD",
            ColumnKind::Categorical => "CAT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub rules: Vec<MappingRule>,
    /// Allowed categories after mapping (CAT only). When absent, the observed
    /// non-negative codes are used.
    pub categories: Option<Vec<i64>>,
}

impl ColumnSpec {
    pub fn new(name: &str, kind: ColumnKind, rules: Vec<MappingRule>) -> Self {
        ColumnSpec {
            name: name.to_string(),
            kind,
            rules,
            categories: None,
        }
    }

    pub fn map(&self, value: i64) -> i64 {
        apply_rules(&self.rules, value)
    }

    /// True when mapping twice equals mapping once, i.e. every target a
    /// value can actually reach is either left alone or sent to itself.
    /// Rules fully shadowed by earlier ones produce nothing and are ignored.
    pub fn is_idempotent(&self) -> bool {
        self.rules
            .iter()
            .enumerate()
            .filter(|(i, r)| !covered(r.low, r.high, &self.rules[..*i]))
            .all(|(_, r)| self.map(r.target) == r.target)
    }
}

/// Parsed mapping file plus non-fatal diagnostics (shadowed rules).
#[derive(Debug, Clone, PartialEq)]
pub struct MappingFile {
    pub columns: Vec<ColumnSpec>,
    pub warnings: Vec<String>,
}

impl MappingFile {
    pub fn get(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Parses a mapping file. Overlapping rules within a line are accepted with
/// first-match semantics and reported in `warnings`; everything else that is
/// malformed is an error carrying the line and character position.
pub fn parse_mapping_file(text: &str) -> Result<MappingFile> {
    let mut columns: Vec<ColumnSpec> = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for (idx, full_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = full_line.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |position: usize, message: String| Error::Parse {
            line: line_no,
            position,
            message,
        };
        let mut fields = FieldCursor::new(line);
        let (name_pos, name) = fields.next_field().expect("line is not blank");
        let (kind_pos, kind) = fields
            .next_field()
            .ok_or_else(|| parse_err(line.len() + 1, format!("column '{name}' has no kind")))?;
        let kind: ColumnKind = kind.parse().map_err(|m| parse_err(kind_pos, m))?;
        if !seen.insert(name.to_string()) {
            return Err(parse_err(name_pos, format!("column '{name}' declared twice")));
        }
        let rest_start = fields.offset();
        let rules = parse_mapping_rules_with(&line[rest_start..], OverlapPolicy::FirstMatchWins)
            .map_err(|e| match e {
                Error::Parse {
                    position, message, ..
                } => parse_err(rest_start + position, message),
                other => other,
            })?;
        for (i, j) in find_overlaps(&rules) {
            warnings.push(format!(
                "line {line_no}: {name} rule '{}' is shadowed by earlier rule '{}'",
                rules[j], rules[i]
            ));
        }
        columns.push(ColumnSpec::new(name, kind, rules));
    }
    Ok(MappingFile { columns, warnings })
}

/// Whitespace-delimited field iterator that remembers byte offsets.
struct FieldCursor<'a> {
    line: &'a str,
    pos: usize,
}

impl<'a> FieldCursor<'a> {
    fn new(line: &'a str) -> Self {
        FieldCursor { line, pos: 0 }
    }

    /// Returns the 1-based position and text of the next field.
    fn next_field(&mut self) -> Option<(usize, &'a str)> {
        let rest = &self.line[self.pos..];
        let start = self.pos + (rest.len() - rest.trim_start().len());
        if start >= self.line.len() {
            self.pos = self.line.len();
            return None;
        }
        let tail = &self.line[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        self.pos = start + len;
        Some((start + 1, &self.line[start..start + len]))
    }

    fn offset(&self) -> usize {
        self.pos
    }
}
