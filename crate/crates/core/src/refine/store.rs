use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{ObjectId, TableMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeResult {
    Changed,
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntrySource {
    GroundTruth,
    Analysis,
    Revision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub text: String,
    pub result: ChangeResult,
    pub source: EntrySource,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub object: ObjectId,
    pub text: String,
    pub confidence: f64,
    pub immutable: bool,
    pub reasoning: String,
    pub history: Vec<HistoryEntry>,
}

/// Descriptions of every table and column, keyed by object id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DescriptionStore {
    records: BTreeMap<ObjectId, DescriptionRecord>,
}

impl DescriptionStore {
    /// One record per table and column, seeded with any catalog description.
    pub fn new(tables: &[TableMeta]) -> Self {
        let mut records = BTreeMap::new();
        let mut add = |object: ObjectId, text: Option<&String>| {
            records.insert(
                object.clone(),
                DescriptionRecord {
                    object,
                    text: text.cloned().unwrap_or_default(),
                    confidence: 0.0,
                    immutable: false,
                    reasoning: String::new(),
                    history: Vec::new(),
                },
            );
        };
        for t in tables {
            let tr = t.table_ref();
            add(ObjectId::Table(tr.clone()), t.existing_description.as_ref());
            for c in &t.columns {
                add(ObjectId::Column(tr.column(c.name.clone())), c.existing_description.as_ref());
            }
        }
        Self { records }
    }

    /// Installs ground-truth text and freezes the objects. Unknown ids are
    /// returned, not inserted.
    pub fn apply_ground_truth(&mut self, truth: &BTreeMap<ObjectId, String>) -> Vec<ObjectId> {
        let mut unknown = Vec::new();
        for (id, text) in truth {
            match self.records.get_mut(id) {
                Some(r) => {
                    r.text = text.clone();
                    r.confidence = 1.0;
                    r.immutable = true;
                    r.history.push(HistoryEntry {
                        iteration: 0,
                        text: text.clone(),
                        result: ChangeResult::Changed,
                        source: EntrySource::GroundTruth,
                        reasoning: "ground truth".into(),
                    });
                }
                None => unknown.push(id.clone()),
            }
        }
        unknown
    }

    pub fn get(&self, id: &ObjectId) -> Option<&DescriptionRecord> {
        self.records.get(id)
    }

    pub fn text(&self, id: &ObjectId) -> &str {
        self.records.get(id).map_or("", |r| r.text.as_str())
    }

    pub fn is_immutable(&self, id: &ObjectId) -> bool {
        self.records.get(id).is_some_and(|r| r.immutable)
    }

    pub fn records(&self) -> impl Iterator<Item = &DescriptionRecord> {
        self.records.values()
    }

    pub fn texts(&self) -> BTreeMap<ObjectId, String> {
        self.records
            .iter()
            .map(|(k, r)| (k.clone(), r.text.clone()))
            .collect()
    }

    /// Records a new description. Immutable and unknown objects are left
    /// alone and yield `None`.
    pub fn update(
        &mut self,
        id: &ObjectId,
        iteration: usize,
        text: &str,
        confidence: f64,
        reasoning: &str,
        source: EntrySource,
    ) -> Option<ChangeResult> {
        let r = self.records.get_mut(id).filter(|r| !r.immutable)?;
        let result = if r.text == text {
            ChangeResult::Unchanged
        } else {
            ChangeResult::Changed
        };
        r.text = text.to_string();
        r.confidence = confidence;
        r.reasoning = reasoning.to_string();
        r.history.push(HistoryEntry {
            iteration,
            text: text.to_string(),
            result,
            source,
            reasoning: reasoning.to_string(),
        });
        Some(result)
    }

    /// Logs a decision that kept the current text.
    pub fn keep(&mut self, id: &ObjectId, iteration: usize, confidence: f64, reasoning: &str) {
        if let Some(r) = self.records.get_mut(id).filter(|r| !r.immutable) {
            r.confidence = confidence;
            r.history.push(HistoryEntry {
                iteration,
                text: r.text.clone(),
                result: ChangeResult::Unchanged,
                source: EntrySource::Revision,
                reasoning: reasoning.to_string(),
            });
        }
    }
}
