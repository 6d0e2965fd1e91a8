use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::{Relationship, TableMeta, TableRef};
use crate::error::SchemaError;

/// Tables stratified into dependency levels.
///
/// Level 0 holds tables that reference no other table; every other table sits
/// one level above the deepest table it references. Self-references never take
/// part in ordering. Edges dropped to break cycles are kept in
/// `removed_cycle_edges` and still count as neighbours for context assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: Vec<TableRef>,
    pub edges: Vec<Relationship>,
    pub levels: Vec<Vec<TableRef>>,
    pub removed_cycle_edges: Vec<Relationship>,
}

impl DependencyGraph {
    pub fn level_of(&self, table: &TableRef) -> Option<usize> {
        self.levels.iter().position(|l| l.contains(table))
    }

    /// Number of levels (`L_0..L_n` gives `n + 1`).
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Edges that participate in level assignment.
    pub fn ordering_edges(&self) -> impl Iterator<Item = &Relationship> {
        self.edges
            .iter()
            .filter(|e| !e.is_self_referencing() && !self.removed_cycle_edges.contains(e))
    }

    /// Tables referenced by `table`, including through cycle-removed edges.
    pub fn parents(&self, table: &TableRef) -> BTreeSet<TableRef> {
        self.edges
            .iter()
            .filter(|e| &e.source_table == table && !e.is_self_referencing())
            .map(|e| e.target_table.clone())
            .collect()
    }

    /// Tables that reference `table`, including through cycle-removed edges.
    pub fn children(&self, table: &TableRef) -> BTreeSet<TableRef> {
        self.edges
            .iter()
            .filter(|e| &e.target_table == table && !e.is_self_referencing())
            .map(|e| e.source_table.clone())
            .collect()
    }

    /// Adds a relationship discovered after ordering. Levels are not
    /// recomputed; the edge becomes visible to neighbour queries only.
    pub fn add_context_edge(&mut self, rel: Relationship) {
        if !self.edges.iter().any(|e| e.edge_key() == rel.edge_key()) {
            self.edges.push(rel);
            self.edges.sort_by(|a, b| a.edge_key().cmp(&b.edge_key()));
        }
    }
}

fn check_references(tables: &[TableMeta], rel: &Relationship) -> Result<(), SchemaError> {
    rel.validate()?;
    for (table, columns) in [
        (&rel.source_table, &rel.source_columns),
        (&rel.target_table, &rel.target_columns),
    ] {
        let meta = tables
            .iter()
            .find(|t| &t.table_ref() == table)
            .ok_or_else(|| SchemaError::UnknownTable(table.to_string()))?;
        for col in columns {
            if meta.column(col).is_none() {
                return Err(SchemaError::UnknownColumn(table.column(col).to_string()));
            }
        }
    }
    Ok(())
}

fn min_edge<'a>(candidates: impl Iterator<Item = (usize, &'a Relationship)>) -> Option<usize> {
    candidates
        .min_by(|(_, a), (_, b)| {
            a.confidence
                .total_cmp(&b.confidence)
                .then_with(|| a.edge_key().cmp(&b.edge_key()))
        })
        .map(|(i, _)| i)
}

/// Builds the level structure. Cycles are broken one strongly connected
/// component at a time by dropping its lowest-confidence edge (ties broken by
/// edge key) until the ordering graph is acyclic.
pub fn build_dependency_graph(
    tables: &[TableMeta],
    relationships: &[Relationship],
) -> Result<DependencyGraph, SchemaError> {
    for rel in relationships {
        check_references(tables, rel)?;
    }

    let nodes: Vec<TableRef> = tables
        .iter()
        .map(TableMeta::table_ref)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&TableRef, usize> = nodes.iter().enumerate().map(|(i, t)| (t, i)).collect();

    let mut edges: Vec<Relationship> = relationships.to_vec();
    edges.sort_by(|a, b| a.edge_key().cmp(&b.edge_key()));

    let mut retained: Vec<Relationship> = edges
        .iter()
        .filter(|e| !e.is_self_referencing())
        .cloned()
        .collect();
    let mut removed = Vec::new();

    loop {
        let mut g = DiGraph::<usize, ()>::with_capacity(nodes.len(), retained.len());
        let ids: Vec<_> = (0..nodes.len()).map(|i| g.add_node(i)).collect();
        for e in &retained {
            g.add_edge(ids[index[&e.source_table]], ids[index[&e.target_table]], ());
        }
        let mut drop: Vec<usize> = Vec::new();
        for scc in tarjan_scc(&g) {
            if scc.len() < 2 {
                continue;
            }
            let members: BTreeSet<&TableRef> = scc.iter().map(|n| &nodes[g[*n]]).collect();
            let inside = retained.iter().enumerate().filter(|(_, e)| {
                members.contains(&e.source_table) && members.contains(&e.target_table)
            });
            if let Some(i) = min_edge(inside) {
                drop.push(i);
            }
        }
        if drop.is_empty() {
            break;
        }
        drop.sort_unstable();
        for i in drop.into_iter().rev() {
            removed.push(retained.remove(i));
        }
    }
    removed.sort_by(|a, b| a.edge_key().cmp(&b.edge_key()));

    let mut parents: BTreeMap<&TableRef, BTreeSet<&TableRef>> = BTreeMap::new();
    for e in &retained {
        parents.entry(&e.source_table).or_default().insert(&e.target_table);
    }
    let mut level: BTreeMap<&TableRef, usize> = BTreeMap::new();
    fn assign<'a>(
        t: &'a TableRef,
        parents: &BTreeMap<&'a TableRef, BTreeSet<&'a TableRef>>,
        level: &mut BTreeMap<&'a TableRef, usize>,
    ) -> usize {
        if let Some(l) = level.get(t) {
            return *l;
        }
        let l = parents
            .get(t)
            .map(|ps| ps.iter().map(|p| assign(p, parents, level) + 1).max().unwrap_or(0))
            .unwrap_or(0);
        level.insert(t, l);
        l
    }
    for t in &nodes {
        assign(t, &parents, &mut level);
    }
    let depth = level.values().copied().max().map_or(0, |m| m + 1);
    let mut levels = vec![Vec::new(); depth];
    for t in &nodes {
        levels[level[t]].push(t.clone());
    }

    Ok(DependencyGraph {
        nodes,
        edges,
        levels,
        removed_cycle_edges: removed,
    })
}
