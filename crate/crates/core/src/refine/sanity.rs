//! Structural consistency rules over keys and relationships.
//!
//! R1 FK targets must be unique and non-null; R2 PK columns hold no nulls;
//! R3 self-referencing FK columns must be nullable; R4 tables whose composite
//! key consists of FK columns are flagged as relationship tables; R5 comes
//! from the analyzer's consistency review; R6 at most one accepted PK per
//! table.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::discovery::PkDiscovery;
use crate::ingest::DiscoveryInput;
use crate::model::{Relationship, TableRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
}

impl Rule {
    /// Whether a violation sends the table back for re-analysis. R4 is an
    /// informational flag.
    pub fn requeues(self) -> bool {
        self != Rule::R4
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SanityRules {
    pub r1: bool,
    pub r2: bool,
    pub r3: bool,
    pub r4: bool,
    pub r5: bool,
    pub r6: bool,
}

impl Default for SanityRules {
    fn default() -> Self {
        Self {
            r1: true,
            r2: true,
            r3: true,
            r4: true,
            r5: true,
            r6: true,
        }
    }
}

impl SanityRules {
    pub fn enabled(&self, rule: Rule) -> bool {
        match rule {
            Rule::R1 => self.r1,
            Rule::R2 => self.r2,
            Rule::R3 => self.r3,
            Rule::R4 => self.r4,
            Rule::R5 => self.r5,
            Rule::R6 => self.r6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub table: TableRef,
    pub message: String,
    /// `level-<n>`, `schema:<name>` or `cross-schema`.
    pub scope: String,
    pub iteration: usize,
}

/// Key facts the structural rules inspect.
#[derive(Clone, Copy)]
pub struct KeyFacts<'a> {
    pub input: DiscoveryInput<'a>,
    pub pks: &'a PkDiscovery,
    pub relationships: &'a [Relationship],
}

/// Whether the column tuple is unique over all rows, and whether any part
/// is null.
fn tuple_stats(input: &DiscoveryInput<'_>, table: &TableRef, columns: &[String]) -> Option<(bool, bool)> {
    let cols: Vec<_> = columns
        .iter()
        .map(|c| input.column_values(table, c))
        .collect::<Option<_>>()?;
    let rows = cols.first().map_or(0, |c| c.len());
    let mut seen = HashSet::new();
    let mut nulls = false;
    let mut unique = true;
    for r in 0..rows {
        let key: Vec<Option<&str>> = cols.iter().map(|c| c[r].as_deref()).collect();
        if key.iter().any(Option::is_none) {
            nulls = true;
        }
        if !seen.insert(key) {
            unique = false;
        }
    }
    Some((unique, nulls))
}

/// Structural rules R1–R4 and R6 for the tables in `scope`.
pub fn structural_violations(
    scope: &BTreeSet<TableRef>,
    facts: &KeyFacts<'_>,
    rules: &SanityRules,
) -> Vec<(Rule, TableRef, String)> {
    let mut out = Vec::new();
    for rel in facts.relationships.iter().filter(|r| scope.contains(&r.source_table)) {
        if rules.r1 {
            match tuple_stats(&facts.input, &rel.target_table, &rel.target_columns) {
                Some((true, false)) => {}
                Some((unique, _)) => out.push((
                    Rule::R1,
                    rel.source_table.clone(),
                    format!(
                        "{rel} targets {} values",
                        if unique { "nullable" } else { "non-unique" }
                    ),
                )),
                None => out.push((
                    Rule::R1,
                    rel.source_table.clone(),
                    format!("{rel} targets columns with no data"),
                )),
            }
        }
        if rules.r3 && rel.is_self_referencing() {
            let meta = facts.input.table(&rel.source_table);
            for c in &rel.source_columns {
                if meta.and_then(|m| m.column(c)).is_some_and(|m| !m.nullable) {
                    out.push((
                        Rule::R3,
                        rel.source_table.clone(),
                        format!("self-referencing column `{c}` is declared NOT NULL"),
                    ));
                }
            }
        }
    }
    for table in scope {
        let detected: Vec<_> = facts.pks.detected().filter(|c| &c.table == table).collect();
        if rules.r6 && detected.len() > 1 {
            let keys: Vec<String> = detected.iter().map(|c| c.columns.join("+")).collect();
            out.push((
                Rule::R6,
                table.clone(),
                format!("{} accepted primary keys: {}", detected.len(), keys.join(", ")),
            ));
        }
        let Some(pk) = facts.pks.primary_key(table) else {
            continue;
        };
        if rules.r2 {
            if let Some((_, true)) = tuple_stats(&facts.input, table, &pk.columns) {
                out.push((
                    Rule::R2,
                    table.clone(),
                    format!("primary key ({}) contains nulls", pk.columns.join(", ")),
                ));
            }
        }
        if rules.r4 && pk.is_composite() {
            let fk_columns: BTreeSet<&String> = facts
                .relationships
                .iter()
                .filter(|r| &r.source_table == table)
                .flat_map(|r| r.source_columns.iter())
                .collect();
            if pk.columns.iter().all(|c| fk_columns.contains(c)) {
                out.push((
                    Rule::R4,
                    table.clone(),
                    format!(
                        "composite key ({}) consists of foreign keys; relationship table",
                        pk.columns.join(", ")
                    ),
                ));
            }
        }
    }
    out
}
